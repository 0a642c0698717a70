#pragma once

// Determinant identities (Cauchy-Binet, principal-minor expansion of a partly
// shifted diagonal, a 2x2 block Gram determinant, the degree-weighted Gram
// comparison) and the random-matrix facts used alongside them.
//
// Each identity is written once over a scalar type T so it can be evaluated in
// double and, for audits, exactly in rationals. Double results carry the sum
// of absolute values of the terms as the scale for relative errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include <Eigen/Eigenvalues>

#include "linalg.hpp"
#include "poly_core.hpp"
#include "rng.hpp"
#include "stats.hpp"

namespace polycond {

template <class T>
struct IdentitySides {
    T lhs{};
    T rhs{};
    double scale = 0.0;  ///< sum of |terms| on the expanded side, at least |lhs|

    double rel_error() const {
        const double diff = std::abs(to_double(lhs - rhs));
        return scale > 0.0 ? diff / scale : diff;
    }

    static double to_double(const T& v) {
        if constexpr (std::is_same_v<T, double>)
            return v;
        else
            return v.template convert_to<double>();
    }
};

namespace detail {
template <class T>
double absd(const T& v) {
    return std::abs(IdentitySides<T>::to_double(v));
}
}  // namespace detail

/// det(AB) against the sum over m-column subsets S of det(A^S) det(B_S).
template <class T>
IdentitySides<T> cauchy_binet(const Grid<T>& a, const Grid<T>& b) {
    const auto m = a.rows(), n = a.cols();
    if (b.rows() != n || b.cols() != m) throw std::invalid_argument("cauchy_binet: shapes must be m x n and n x m");
    if (m > n) throw std::invalid_argument("cauchy_binet: requires m <= n");
    IdentitySides<T> r;
    r.lhs = det(a * b);
    const auto rows_all = full_set(static_cast<int>(m));
    for (const auto& s : subsets_of_size(static_cast<int>(n), static_cast<int>(m))) {
        const T term = det(submatrix(a, rows_all, s)) * det(submatrix(b, s, rows_all));
        r.rhs += term;
        r.scale += detail::absd(term);
    }
    r.scale = std::max(r.scale, detail::absd(r.lhs));
    return r;
}

inline IdentitySides<double> cauchy_binet_check(const Matrix& a, const Matrix& b) {
    return cauchy_binet(to_grid(a), to_grid(b));
}

/// C with lambda added to the first q diagonal entries.
template <class T>
Grid<T> shifted(const Grid<T>& c, int q, const T& lambda) {
    Grid<T> out = c;
    for (int i = 0; i < q; ++i) out(i, i) += lambda;
    return out;
}

/// det(C_q(lambda)) against det(C) + sum_l lambda^l sum_{S in {0..q-1}, |S| = l} det(C[S', S']),
/// S' the complement of S, with det of the empty matrix equal to 1.
template <class T>
IdentitySides<T> shifted_det(const Grid<T>& c, int q, const T& lambda) {
    const int m = static_cast<int>(c.rows());
    if (c.cols() != m) throw std::invalid_argument("shifted_det: matrix is not square");
    if (q < 1 || q > m) throw std::invalid_argument("shifted_det: need 1 <= q <= m");
    IdentitySides<T> r;
    r.lhs = det(shifted(c, q, lambda));
    r.rhs = det(c);
    r.scale = detail::absd(r.rhs);
    T power = T(1);
    for (int l = 1; l <= q; ++l) {
        power *= lambda;
        for (const auto& s : subsets_of_size(q, l)) {
            IndexSubset in_m{s.members, m};
            const auto keep = in_m.complement();
            const T term = det(submatrix(c, keep, keep)) * power;
            r.rhs += term;
            r.scale += detail::absd(term);
        }
    }
    r.scale = std::max(r.scale, detail::absd(r.lhs));
    return r;
}

inline IdentitySides<double> shifted_det_expansion(const Matrix& c, int q, double lambda) {
    return shifted_det(to_grid(c), q, lambda);
}

/// Q = [[A A^t + B B^t, A C^t], [C A^t, C C^t]] with A, B k x n and C (n-1) x n.
template <class T>
Grid<T> block_gram(const Grid<T>& a, const Grid<T>& b, const Grid<T>& c) {
    const auto k = a.rows(), n = a.cols();
    const Grid<T> tl = a * a.transpose() + b * b.transpose();
    const Grid<T> tr = a * c.transpose();
    const Grid<T> br = c * c.transpose();
    Grid<T> q(k + n - 1, k + n - 1);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j) q(i, j) = tl(i, j);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < n - 1; ++j) q(i, k + j) = q(k + j, i) = tr(i, j);
    for (Eigen::Index i = 0; i < n - 1; ++i)
        for (Eigen::Index j = 0; j < n - 1; ++j) q(k + i, k + j) = br(i, j);
    return q;
}

/// det Q against det(CC^t) det(BB^t)
///   + sum_{|S| = k-1} (sum_{i,j} (-1)^{i+j-1} a_ij det(B[rows != i, cols S]) det(C[:, cols != j]))^2.
template <class T>
IdentitySides<T> block_det(const Grid<T>& a, const Grid<T>& b, const Grid<T>& c) {
    const auto k = a.rows(), n = a.cols();
    if (k < 1 || k >= n) throw std::invalid_argument("block_det: need 1 <= k < n");
    if (b.rows() != k || b.cols() != n || c.rows() != n - 1 || c.cols() != n)
        throw std::invalid_argument("block_det: shapes must be A, B k x n and C (n-1) x n");
    IdentitySides<T> r;
    r.lhs = det(block_gram(a, b, c));
    r.rhs = det(c * c.transpose()) * det(b * b.transpose());
    r.scale = detail::absd(r.rhs);
    std::vector<T> c_minor(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) c_minor[static_cast<std::size_t>(j)] = det(drop_col(c, static_cast<int>(j)));
    for (const auto& s : subsets_of_size(static_cast<int>(n), static_cast<int>(k - 1))) {
        T inner = T(0);
        for (Eigen::Index i = 0; i < k; ++i) {
            const T b_minor = det(submatrix(b, all_but(static_cast<int>(k), static_cast<int>(i)), s));
            for (Eigen::Index j = 0; j < n; ++j) {
                if (a(i, j) == 0) continue;
                // 1-based exponent i+j-1 is odd exactly when the 0-based i+j is even
                const T sign = ((i + j) % 2 == 0) ? T(-1) : T(1);
                inner += sign * a(i, j) * b_minor * c_minor[static_cast<std::size_t>(j)];
            }
        }
        const T term = inner * inner;
        r.rhs += term;
        r.scale += detail::absd(term);
    }
    r.scale = std::max(r.scale, detail::absd(r.lhs));
    return r;
}

inline IdentitySides<double> block_det_identity(const Matrix& a, const Matrix& b, const Matrix& c) {
    return block_det(to_grid(a), to_grid(b), to_grid(c));
}

/// Gram determinants of B and of Bhat = B diag(2/sqrt(d_i)), optionally after
/// deleting a set of rows S, with the two-sided degree bounds
///   2^{2n-1-l}/Bez det(BB^t) <= det(Bhat Bhat^t) <= 2^{2(n-1-l)} Dmax^{l+1}/Bez det(BB^t),  l = |S|,
/// and det(Bhat Bhat^t) recomputed as the Cauchy-Binet sum over column subsets.
struct BhatComparison {
    double det_BBt = 0.0;
    double det_BhatBhatT = 0.0;
    double det_BhatBhatT_by_minors = 0.0;
    double minors_scale = 0.0;
    double lower = 0.0;
    double upper = 0.0;

    bool sandwich_holds(double rel_tol = 1e-10) const {
        const double slack = rel_tol * std::max({std::abs(det_BhatBhatT), std::abs(lower), std::abs(upper), 1e-300});
        return lower <= det_BhatBhatT + slack && det_BhatBhatT <= upper + slack;
    }
    double two_way_rel_error() const {
        const double diff = std::abs(det_BhatBhatT - det_BhatBhatT_by_minors);
        return minors_scale > 0.0 ? diff / minors_scale : diff;
    }
};

inline BhatComparison bhat_comparison(const Matrix& b_full, const std::vector<int>& degrees,
                                      const IndexSubset& removed_rows = {}) {
    const auto n = b_full.cols();
    if (b_full.rows() != n - 1) throw std::invalid_argument("bhat_comparison: B must be (n-1) x n");
    if (static_cast<Eigen::Index>(degrees.size()) != n) throw std::invalid_argument("bhat_comparison: need n degrees");
    for (int d : degrees)
        if (d < 2) throw std::invalid_argument("bhat_comparison: the bounds need every degree >= 2");
    const auto mc = model_constants(degrees, static_cast<int>(n));
    const double bez = static_cast<double>(mc.bezout);
    const int l = static_cast<int>(removed_rows.size());

    IndexSubset rows{removed_rows.members, static_cast<int>(b_full.rows())};
    const Grid<double> b = select_rows(to_grid(b_full), rows.complement());
    Grid<double> h(n, n);
    for (Eigen::Index i = 0; i < n; ++i) h(i, i) = 2.0 / std::sqrt(static_cast<double>(degrees[static_cast<std::size_t>(i)]));
    const Grid<double> bh = b * h;

    BhatComparison r;
    r.det_BBt = det(b * b.transpose());
    r.det_BhatBhatT = det(bh * bh.transpose());
    const auto rows_all = full_set(static_cast<int>(b.rows()));
    for (const auto& t : subsets_of_size(static_cast<int>(n), static_cast<int>(b.rows()))) {
        double w = 1.0;
        for (int i : t.members) w *= 4.0 / degrees[static_cast<std::size_t>(i)];
        const double m = det(submatrix(b, rows_all, t));
        r.det_BhatBhatT_by_minors += w * m * m;
        r.minors_scale += w * m * m;
    }
    r.minors_scale = std::max(r.minors_scale, std::abs(r.det_BhatBhatT));
    r.lower = std::ldexp(1.0, static_cast<int>(2 * n - 1 - l)) / bez * r.det_BBt;
    r.upper = std::ldexp(1.0, static_cast<int>(2 * (n - 1 - l))) * std::pow(mc.max_degree, l + 1) / bez * r.det_BBt;
    return r;
}

/// Exact form of the two-way check: B diag(4/d_i) B^t against the minor sum.
inline IdentitySides<Rational> bhat_minors_exact(const Matrix& b_full, const std::vector<int>& degrees) {
    const auto n = b_full.cols();
    const Grid<Rational> b = to_grid<Rational>(b_full);
    Grid<Rational> w(n, n);
    for (Eigen::Index i = 0; i < n; ++i) w(i, i) = Rational(4, degrees[static_cast<std::size_t>(i)]);
    IdentitySides<Rational> r;
    r.lhs = det(b * w * b.transpose());
    const auto rows_all = full_set(static_cast<int>(b.rows()));
    for (const auto& t : subsets_of_size(static_cast<int>(n), static_cast<int>(b.rows()))) {
        Rational f = 1;
        for (int i : t.members) f *= Rational(4, degrees[static_cast<std::size_t>(i)]);
        const Rational m = det(submatrix(b, rows_all, t));
        r.rhs += f * m * m;
    }
    return r;
}

/// n!/(n-m)!, the expected Gram determinant of an m x n standard Gaussian matrix.
inline double wishart_det_exact(int m, int n) {
    if (m < 0 || m > n) throw std::invalid_argument("wishart: requires 0 <= m <= n");
    double r = 1.0;
    for (int i = n - m + 1; i <= n; ++i) r *= i;
    return r;
}

struct WishartEstimate {
    MonteCarloMean empirical;
    double exact = 0.0;
};

inline WishartEstimate wishart_expected_det(int m, int n, std::int64_t trials, RngStream rng) {
    WishartEstimate out;
    out.exact = wishart_det_exact(m, n);
    RunningStats st;
    Matrix u(m, n);
    for (std::int64_t t = 0; t < trials; ++t) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) u(i, j) = rng.normal();
        st.add(det(Matrix(u * u.transpose())));
    }
    out.empirical = st.summary();
    return out;
}

struct GoeLikeMatrix {
    int n = 0;
    Matrix entries;
};

/// Symmetric Gaussian matrix, off-diagonal variance 1/n and diagonal 2/n.
/// Draw order: upper triangle row by row, diagonal included.
inline GoeLikeMatrix sample_goe_like(int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_goe_like: n must be >= 1");
    GoeLikeMatrix g{n, Matrix(n, n)};
    const double off = std::sqrt(1.0 / n), diag = std::sqrt(2.0 / n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = rng.normal() * (i == j ? diag : off);
            g.entries(i, j) = g.entries(j, i) = v;
        }
    return g;
}

/// max(0, largest eigenvalue) of a symmetric matrix.
inline double lambda_bar(const Matrix& g) {
    if (g.rows() != g.cols()) throw std::invalid_argument("lambda_bar: matrix is not square");
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
}
inline double lambda_bar(const GoeLikeMatrix& g) { return lambda_bar(g.entries); }

/// P(lambda_bar >= 2 + sqrt(2) t) < exp(-n t^2 / 2).
inline double lambda_bar_tail_bound(int n, double t) {
    if (n < 1) throw std::invalid_argument("lambda_bar_tail_bound: n must be >= 1");
    if (t < 0.0) throw std::invalid_argument("lambda_bar_tail_bound: t must be >= 0");
    return std::exp(-0.5 * n * t * t);
}

}  // namespace polycond
