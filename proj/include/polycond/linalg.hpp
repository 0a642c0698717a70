#pragma once

// Small dense linear algebra shared by the condition-number code and the
// determinant identities: index subsets, LU determinants with the empty-matrix
// convention, an exact rational determinant, and the Householder tangent frame.

#include <algorithm>
#include <utility>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "poly_core.hpp"

namespace polycond {

using Rational = boost::multiprecision::cpp_rational;

/// Strictly increasing 0-based indices within [0, universe).
struct IndexSubset {
    std::vector<int> members;
    int universe = 0;

    std::size_t size() const { return members.size(); }
    bool contains(int i) const { return std::binary_search(members.begin(), members.end(), i); }

    IndexSubset complement() const {
        IndexSubset c{{}, universe};
        for (int i = 0; i < universe; ++i)
            if (!contains(i)) c.members.push_back(i);
        return c;
    }
};

/// All k-subsets of {0..m-1} in lexicographic order.
inline std::vector<IndexSubset> subsets_of_size(int m, int k) {
    std::vector<IndexSubset> out;
    if (k < 0 || k > m) return out;
    std::vector<int> cur(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) cur[static_cast<std::size_t>(i)] = i;
    while (true) {
        out.push_back({cur, m});
        int i = k - 1;
        while (i >= 0 && cur[static_cast<std::size_t>(i)] == m - k + i) --i;
        if (i < 0) break;
        ++cur[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) cur[static_cast<std::size_t>(j)] = cur[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

/// Row-major dense matrix over an arbitrary field; used where the same
/// identity is evaluated both in double and in exact rational arithmetic.
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(Eigen::Index rows, Eigen::Index cols) : rows_(rows), cols_(cols), v_(static_cast<std::size_t>(rows * cols), T(0)) {}

    static Grid identity(Eigen::Index m) {
        Grid g(m, m);
        for (Eigen::Index i = 0; i < m; ++i) g(i, i) = T(1);
        return g;
    }

    Eigen::Index rows() const { return rows_; }
    Eigen::Index cols() const { return cols_; }
    T& operator()(Eigen::Index i, Eigen::Index j) { return v_[static_cast<std::size_t>(i * cols_ + j)]; }
    const T& operator()(Eigen::Index i, Eigen::Index j) const { return v_[static_cast<std::size_t>(i * cols_ + j)]; }

    Grid transpose() const {
        Grid t(cols_, rows_);
        for (Eigen::Index i = 0; i < rows_; ++i)
            for (Eigen::Index j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }
    friend Grid operator*(const Grid& a, const Grid& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("Grid: product shape mismatch");
        Grid c(a.rows_, b.cols_);
        for (Eigen::Index i = 0; i < a.rows_; ++i)
            for (Eigen::Index k = 0; k < a.cols_; ++k) {
                if (a(i, k) == 0) continue;
                for (Eigen::Index j = 0; j < b.cols_; ++j) c(i, j) += a(i, k) * b(k, j);
            }
        return c;
    }
    friend Grid operator+(Grid a, const Grid& b) {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw std::invalid_argument("Grid: sum shape mismatch");
        for (std::size_t i = 0; i < a.v_.size(); ++i) a.v_[i] += b.v_[i];
        return a;
    }

private:
    Eigen::Index rows_ = 0, cols_ = 0;
    std::vector<T> v_;
};

template <class T = double>
Grid<T> to_grid(const Matrix& a) {
    Grid<T> g(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            if (!std::isfinite(a(i, j))) throw std::invalid_argument("to_grid: non-finite entry");
            g(i, j) = T(a(i, j));  // exact for Rational: every binary64 is dyadic
        }
    return g;
}

inline Matrix to_matrix(const Grid<double>& g) {
    Matrix a(g.rows(), g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < g.cols(); ++j) a(i, j) = g(i, j);
    return a;
}

template <class T>
Grid<T> submatrix(const Grid<T>& a, const IndexSubset& rows, const IndexSubset& cols) {
    Grid<T> out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = a(rows.members[r], cols.members[c]);
    return out;
}

inline IndexSubset full_set(int universe) {
    IndexSubset s{{}, universe};
    for (int i = 0; i < universe; ++i) s.members.push_back(i);
    return s;
}

inline IndexSubset all_but(int universe, int skip) {
    IndexSubset keep{{}, universe};
    for (int i = 0; i < universe; ++i)
        if (i != skip) keep.members.push_back(i);
    return keep;
}

template <class T>
Grid<T> select_rows(const Grid<T>& a, const IndexSubset& rows) {
    return submatrix(a, rows, full_set(static_cast<int>(a.cols())));
}
template <class T>
Grid<T> select_cols(const Grid<T>& a, const IndexSubset& cols) {
    return submatrix(a, full_set(static_cast<int>(a.rows())), cols);
}
template <class T>
Grid<T> drop_row(const Grid<T>& a, int r) {
    return select_rows(a, all_but(static_cast<int>(a.rows()), r));
}
template <class T>
Grid<T> drop_col(const Grid<T>& a, int c) {
    return select_cols(a, all_but(static_cast<int>(a.cols()), c));
}

/// LU determinant with partial pivoting; the 0x0 determinant is 1.
inline double det(const Matrix& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("det: matrix is not square");
    if (a.rows() == 0) return 1.0;
    return a.partialPivLu().determinant();
}

inline double det(const Grid<double>& a) { return det(to_matrix(a)); }

/// Exact determinant by fraction-valued Gaussian elimination; 0x0 gives 1.
inline Rational det(Grid<Rational> a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("det: matrix is not square");
    const Eigen::Index m = a.rows();
    Rational d = 1;
    for (Eigen::Index c = 0; c < m; ++c) {
        Eigen::Index p = c;
        while (p < m && a(p, c) == 0) ++p;
        if (p == m) return Rational(0);
        if (p != c) {
            for (Eigen::Index k = 0; k < m; ++k) std::swap(a(p, k), a(c, k));
            d = -d;
        }
        d *= a(c, c);
        for (Eigen::Index r = c + 1; r < m; ++r) {
            if (a(r, c) == 0) continue;
            const Rational factor = a(r, c) / a(c, c);
            for (Eigen::Index k = c; k < m; ++k) a(r, k) -= factor * a(c, k);
        }
    }
    return d;
}

/// Orthonormal basis of the tangent space x-perp, deterministic in x.
///
/// Columns 1..n of the Householder reflector that maps e_0 to +-x. The sign
/// choice keeps the reflector vector away from zero.
inline Matrix householder_tangent_basis(const Vector& x) {
    const Eigen::Index m = x.size();
    if (m < 2) throw std::invalid_argument("householder_tangent_basis: need at least two coordinates");
    Vector v = x;
    if (x[0] > 0.0) {
        v[0] += 1.0;  // H e_0 = -x
    } else {
        v = -v;
        v[0] += 1.0;  // H e_0 = x
    }
    const double vv = v.squaredNorm();
    Matrix basis(m, m - 1);
    for (Eigen::Index k = 1; k < m; ++k) {
        Vector col = -2.0 * v[k] / vv * v;
        col[k] += 1.0;
        basis.col(k - 1) = col;
    }
    return basis;
}

/// Smallest singular value (JacobiSVD, accurate near zero).
inline double sigma_min(const Matrix& a) {
    if (a.rows() == 0 || a.cols() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues().minCoeff();
}

}  // namespace polycond
