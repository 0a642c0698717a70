#pragma once

// Dense homogeneous polynomials in n+1 real variables, stored coefficient by
// coefficient over the full simplex of exponents of a fixed degree, with the
// Weyl (Bombieri) norm and exact first/second/third derivatives.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace polycond {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Exponent vector (j_0, ..., j_n) of a monomial x^j.
struct MultiIndex {
    std::vector<int> exponents;

    int degree() const {
        int s = 0;
        for (int e : exponents) s += e;
        return s;
    }
    std::size_t size() const { return exponents.size(); }
    int operator[](std::size_t k) const { return exponents[k]; }
    bool operator==(const MultiIndex&) const = default;
};

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r))
        throw std::overflow_error("polycond: integer overflow in combinatorial coefficient");
    return r;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r))
        throw std::overflow_error("polycond: integer overflow in combinatorial coefficient");
    return r;
}

}  // namespace detail

/// Exact binomial coefficient C(n, k); throws std::overflow_error past 64 bits.
inline std::uint64_t binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t r = 1;
    for (std::int64_t i = 1; i <= k; ++i) {
        // r * (n - k + i) / i stays integral at every step
        const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
        const std::uint64_t g = std::gcd(r, static_cast<std::uint64_t>(i));
        const std::uint64_t r1 = r / g;
        const std::uint64_t i1 = static_cast<std::uint64_t>(i) / g;
        r = detail::checked_mul(r1, num / i1);
    }
    return r;
}

/// Multinomial d! / (j_0! ... j_n!), exact. Requires |j| = d.
inline std::uint64_t multinomial(int d, const MultiIndex& j) {
    if (d < 0) throw std::invalid_argument("multinomial: negative degree");
    for (int e : j.exponents)
        if (e < 0) throw std::invalid_argument("multinomial: negative exponent");
    if (j.degree() != d) throw std::invalid_argument("multinomial: |j| != d");
    std::uint64_t r = 1;
    int remaining = d;
    for (int e : j.exponents) {
        r = detail::checked_mul(r, binomial(remaining, e));
        remaining -= e;
    }
    return r;
}

/// All exponent vectors of total degree d in num_vars variables, in
/// graded-lexicographic order (x_0 most significant, descending).
inline std::vector<MultiIndex> monomials_of_degree(int num_vars, int d) {
    std::vector<MultiIndex> out;
    std::vector<int> cur(static_cast<std::size_t>(num_vars), 0);
    // recursive fill: position k receives e from remaining down to 0
    auto rec = [&](auto&& self, int k, int remaining) -> void {
        if (k == num_vars - 1) {
            cur[static_cast<std::size_t>(k)] = remaining;
            out.push_back(MultiIndex{cur});
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            cur[static_cast<std::size_t>(k)] = e;
            self(self, k + 1, remaining - e);
        }
    };
    if (num_vars <= 0) throw std::invalid_argument("monomials_of_degree: need at least one variable");
    rec(rec, 0, d);
    return out;
}

class HomogeneousPoly {
public:
    HomogeneousPoly() = default;

    /// Zero polynomial of the given degree in num_vars variables.
    HomogeneousPoly(int num_vars, int degree) : num_vars_(num_vars), degree_(degree) {
        if (num_vars < 1) throw std::invalid_argument("HomogeneousPoly: num_vars must be >= 1");
        if (degree < 1) throw std::invalid_argument("HomogeneousPoly: degree must be >= 1");
        auto monos = monomials_of_degree(num_vars, degree);
        const std::size_t count = monos.size();
        if (count != binomial(num_vars - 1 + degree, num_vars - 1))
            throw std::logic_error("HomogeneousPoly: monomial enumeration mismatch");
        exps_.resize(count * static_cast<std::size_t>(num_vars));
        weights_.resize(count);
        for (std::size_t t = 0; t < count; ++t) {
            std::copy(monos[t].exponents.begin(), monos[t].exponents.end(),
                      exps_.begin() + static_cast<std::ptrdiff_t>(t * static_cast<std::size_t>(num_vars)));
            weights_[t] = static_cast<double>(multinomial(degree, monos[t]));
        }
        coeffs_.assign(count, 0.0);
    }

    HomogeneousPoly(int num_vars, int degree, std::vector<double> coeffs) : HomogeneousPoly(num_vars, degree) {
        if (coeffs.size() != coeffs_.size())
            throw std::invalid_argument("HomogeneousPoly: coefficient count must be C(n+d, n)");
        coeffs_ = std::move(coeffs);
    }

    int num_vars() const { return num_vars_; }
    int degree() const { return degree_; }
    std::size_t size() const { return coeffs_.size(); }

    MultiIndex monomial(std::size_t t) const {
        const auto* p = exps_.data() + t * static_cast<std::size_t>(num_vars_);
        return MultiIndex{std::vector<int>(p, p + num_vars_)};
    }
    int exponent(std::size_t t, int k) const { return exps_[t * static_cast<std::size_t>(num_vars_) + static_cast<std::size_t>(k)]; }

    /// Multinomial C(d, j) of the t-th monomial (as a double; exact at desk scale).
    double weight(std::size_t t) const { return weights_[t]; }

    const std::vector<double>& coeffs() const { return coeffs_; }
    double coeff(std::size_t t) const { return coeffs_[t]; }
    void set_coeff(std::size_t t, double v) { coeffs_[t] = v; }

    /// Position of a multi-index in the dense layout, or size() when absent.
    std::size_t index_of(const MultiIndex& j) const {
        if (static_cast<int>(j.size()) != num_vars_ || j.degree() != degree_) return size();
        for (std::size_t t = 0; t < size(); ++t) {
            bool eq = true;
            for (int k = 0; k < num_vars_ && eq; ++k) eq = exponent(t, k) == j[static_cast<std::size_t>(k)];
            if (eq) return t;
        }
        return size();
    }
    void set_coeff(const MultiIndex& j, double v) {
        const auto t = index_of(j);
        if (t == size()) throw std::invalid_argument("HomogeneousPoly: exponent vector does not belong to this space");
        coeffs_[t] = v;
    }

    double eval(const Vector& x) const {
        check_dim(x);
        const auto pw = powers(x);
        double s = 0.0;
        for (std::size_t t = 0; t < size(); ++t) {
            if (coeffs_[t] == 0.0) continue;
            double m = coeffs_[t];
            for (int k = 0; k < num_vars_; ++k) m *= pw[idx(k, exponent(t, k))];
            s += m;
        }
        return s;
    }

    Vector gradient(const Vector& x) const {
        check_dim(x);
        const auto pw = powers(x);
        Vector g = Vector::Zero(num_vars_);
        for (std::size_t t = 0; t < size(); ++t) {
            const double c = coeffs_[t];
            if (c == 0.0) continue;
            for (int k = 0; k < num_vars_; ++k) {
                const int ek = exponent(t, k);
                if (ek == 0) continue;
                double m = c * ek;
                for (int l = 0; l < num_vars_; ++l) m *= pw[idx(l, exponent(t, l) - (l == k ? 1 : 0))];
                g[k] += m;
            }
        }
        return g;
    }

    Matrix hessian(const Vector& x) const {
        check_dim(x);
        const auto pw = powers(x);
        Matrix h = Matrix::Zero(num_vars_, num_vars_);
        std::vector<int> e(static_cast<std::size_t>(num_vars_));
        for (std::size_t t = 0; t < size(); ++t) {
            const double c = coeffs_[t];
            if (c == 0.0) continue;
            for (int k = 0; k < num_vars_; ++k) {
                for (int l = k; l < num_vars_; ++l) {
                    for (int m = 0; m < num_vars_; ++m) e[static_cast<std::size_t>(m)] = exponent(t, m);
                    double f = c;
                    f *= e[static_cast<std::size_t>(k)]--;
                    if (f == 0.0) continue;
                    f *= e[static_cast<std::size_t>(l)]--;
                    if (f == 0.0) continue;
                    for (int m = 0; m < num_vars_; ++m) f *= pw[idx(m, e[static_cast<std::size_t>(m)])];
                    h(k, l) += f;
                }
            }
        }
        for (int k = 0; k < num_vars_; ++k)
            for (int l = 0; l < k; ++l) h(k, l) = h(l, k);
        return h;
    }

    /// Directional derivative of the Hessian: sum_m v_m * d^3 f / dx_k dx_l dx_m.
    Matrix hessian_derivative(const Vector& x, const Vector& v) const {
        check_dim(x);
        check_dim(v);
        const auto pw = powers(x);
        Matrix h = Matrix::Zero(num_vars_, num_vars_);
        std::vector<int> e(static_cast<std::size_t>(num_vars_));
        for (std::size_t t = 0; t < size(); ++t) {
            const double c = coeffs_[t];
            if (c == 0.0) continue;
            for (int k = 0; k < num_vars_; ++k) {
                for (int l = k; l < num_vars_; ++l) {
                    for (int m = 0; m < num_vars_; ++m) {
                        if (v[m] == 0.0) continue;
                        for (int q = 0; q < num_vars_; ++q) e[static_cast<std::size_t>(q)] = exponent(t, q);
                        double f = c * v[m];
                        f *= e[static_cast<std::size_t>(k)]--;
                        if (f == 0.0) continue;
                        f *= e[static_cast<std::size_t>(l)]--;
                        if (f == 0.0) continue;
                        f *= e[static_cast<std::size_t>(m)]--;
                        if (f == 0.0) continue;
                        for (int q = 0; q < num_vars_; ++q) f *= pw[idx(q, e[static_cast<std::size_t>(q)])];
                        h(k, l) += f;
                    }
                }
            }
        }
        for (int k = 0; k < num_vars_; ++k)
            for (int l = 0; l < k; ++l) h(k, l) = h(l, k);
        return h;
    }

    /// Value, gradient and (optionally) Hessian in one pass over the monomials.
    /// grad must have num_vars entries; hess, when given, is num_vars square.
    void jet(const Vector& x, double& value, Eigen::Ref<Vector, 0, Eigen::InnerStride<>> grad, Matrix* hess) const {
        check_dim(x);
        constexpr std::size_t kStack = 256;
        const std::size_t need = static_cast<std::size_t>(num_vars_) * static_cast<std::size_t>(degree_ + 1);
        double stack_buf[kStack];
        std::vector<double> heap_buf;
        double* pw = stack_buf;
        if (need > kStack) {
            heap_buf.resize(need);
            pw = heap_buf.data();
        }
        for (int k = 0; k < num_vars_; ++k) {
            double p = 1.0;
            for (int e = 0; e <= degree_; ++e) {
                pw[idx(k, e)] = p;
                p *= x[k];
            }
        }
        value = 0.0;
        grad.setZero();
        if (hess) hess->setZero();
        const int nv = num_vars_;
        for (std::size_t t = 0; t < size(); ++t) {
            const double c = coeffs_[t];
            if (c == 0.0) continue;
            const int* e = exps_.data() + t * static_cast<std::size_t>(nv);
            double full = c;
            for (int l = 0; l < nv; ++l) full *= pw[idx(l, e[l])];
            value += full;
            for (int k = 0; k < nv; ++k) {
                if (e[k] == 0) continue;
                double gk = c * e[k];
                for (int l = 0; l < nv; ++l) gk *= pw[idx(l, e[l] - (l == k ? 1 : 0))];
                grad[k] += gk;
                if (!hess) continue;
                for (int m = k; m < nv; ++m) {
                    const int em = e[m] - (m == k ? 1 : 0);
                    if (em == 0) continue;
                    double h = c * e[k] * em;
                    for (int l = 0; l < nv; ++l) h *= pw[idx(l, e[l] - (l == k ? 1 : 0) - (l == m ? 1 : 0))];
                    (*hess)(k, m) += h;
                }
            }
        }
        if (hess)
            for (int k = 0; k < nv; ++k)
                for (int m = 0; m < k; ++m) (*hess)(k, m) = (*hess)(m, k);
    }

    /// ||f||_W = sqrt(sum a_j^2 / C(d, j)).
    double weyl_norm() const { return std::sqrt(weyl_norm_sq()); }
    double weyl_norm_sq() const {
        double s = 0.0;
        for (std::size_t t = 0; t < size(); ++t) s += coeffs_[t] * coeffs_[t] / weights_[t];
        return s;
    }

    HomogeneousPoly scaled(double lambda) const {
        HomogeneousPoly r = *this;
        for (auto& c : r.coeffs_) c *= lambda;
        return r;
    }

private:
    void check_dim(const Vector& x) const {
        if (x.size() != num_vars_)
            throw std::invalid_argument("HomogeneousPoly: point has " + std::to_string(x.size()) +
                                        " coordinates, expected " + std::to_string(num_vars_));
    }
    std::size_t idx(int var, int e) const {
        return static_cast<std::size_t>(var) * static_cast<std::size_t>(degree_ + 1) + static_cast<std::size_t>(e);
    }
    // pw[var*(d+1) + e] = x_var^e
    std::vector<double> powers(const Vector& x) const {
        std::vector<double> pw(static_cast<std::size_t>(num_vars_) * static_cast<std::size_t>(degree_ + 1));
        for (int k = 0; k < num_vars_; ++k) {
            double p = 1.0;
            for (int e = 0; e <= degree_; ++e) {
                pw[idx(k, e)] = p;
                p *= x[k];
            }
        }
        return pw;
    }

    int num_vars_ = 0;
    int degree_ = 0;
    std::vector<int> exps_;
    std::vector<double> weights_;
    std::vector<double> coeffs_;
};

inline double eval(const HomogeneousPoly& f, const Vector& x) { return f.eval(x); }
inline Vector gradient(const HomogeneousPoly& f, const Vector& x) { return f.gradient(x); }
inline Matrix hessian(const HomogeneousPoly& f, const Vector& x) { return f.hessian(x); }
inline double weyl_norm(const HomogeneousPoly& f) { return f.weyl_norm(); }

struct SystemNorms {
    double max_weyl = 0.0;  ///< max_i ||f_i||_W, used by kappa and mu_norm
    double l2_weyl = 0.0;   ///< sqrt(sum_i ||f_i||_W^2), used by kappa-tilde
};

/// n homogeneous polynomials in n+1 variables.
class PolySystem {
public:
    PolySystem() = default;

    explicit PolySystem(std::vector<HomogeneousPoly> polys) : polys_(std::move(polys)) {
        if (polys_.empty()) throw std::invalid_argument("PolySystem: need at least one polynomial");
        const int n = static_cast<int>(polys_.size());
        for (const auto& p : polys_) {
            if (p.num_vars() != n + 1)
                throw std::invalid_argument("PolySystem: " + std::to_string(n) + " polynomials need " +
                                            std::to_string(n + 1) + " variables, got " +
                                            std::to_string(p.num_vars()));
        }
    }

    /// Zero system with the given degrees (n = degrees.size()).
    static PolySystem zeros(const std::vector<int>& degrees) {
        std::vector<HomogeneousPoly> ps;
        const int n = static_cast<int>(degrees.size());
        ps.reserve(degrees.size());
        for (int d : degrees) ps.emplace_back(n + 1, d);
        return PolySystem(std::move(ps));
    }

    int n() const { return static_cast<int>(polys_.size()); }
    int num_vars() const { return n() + 1; }
    const HomogeneousPoly& operator[](std::size_t i) const { return polys_[i]; }
    HomogeneousPoly& operator[](std::size_t i) { return polys_[i]; }
    const std::vector<HomogeneousPoly>& polys() const { return polys_; }

    std::vector<int> degrees() const {
        std::vector<int> d;
        d.reserve(polys_.size());
        for (const auto& p : polys_) d.push_back(p.degree());
        return d;
    }

    /// True when some d_i = 1; such systems are accepted but outside the d_i >= 2 model assumption.
    bool has_linear_component() const {
        return std::any_of(polys_.begin(), polys_.end(), [](const auto& p) { return p.degree() == 1; });
    }

    Vector eval(const Vector& x) const {
        Vector v(n());
        for (int i = 0; i < n(); ++i) v[i] = polys_[static_cast<std::size_t>(i)].eval(x);
        return v;
    }

    /// n x (n+1) matrix whose rows are the gradients of the f_i.
    Matrix jacobian(const Vector& x) const {
        Matrix J(n(), num_vars());
        for (int i = 0; i < n(); ++i) J.row(i) = polys_[static_cast<std::size_t>(i)].gradient(x).transpose();
        return J;
    }

    /// f(x), Df(x) and optionally the Hessians of every f_i, in one pass.
    void jet(const Vector& x, Vector& values, Matrix& jac, std::vector<Matrix>* hessians = nullptr) const {
        values.resize(n());
        jac.resize(n(), num_vars());
        if (hessians) hessians->resize(polys_.size());
        for (int i = 0; i < n(); ++i) {
            Matrix* h = nullptr;
            if (hessians) {
                h = &(*hessians)[static_cast<std::size_t>(i)];
                h->resize(num_vars(), num_vars());
            }
            polys_[static_cast<std::size_t>(i)].jet(x, values[i], jac.row(i).transpose(), h);
        }
    }

    SystemNorms norms() const {
        SystemNorms s;
        double sq = 0.0;
        for (const auto& p : polys_) {
            const double w2 = p.weyl_norm_sq();
            sq += w2;
            s.max_weyl = std::max(s.max_weyl, std::sqrt(w2));
        }
        s.l2_weyl = std::sqrt(sq);
        return s;
    }

    bool is_zero() const {
        for (const auto& p : polys_)
            for (double c : p.coeffs())
                if (c != 0.0) return false;
        return true;
    }

    PolySystem scaled(double lambda) const {
        std::vector<HomogeneousPoly> ps;
        ps.reserve(polys_.size());
        for (const auto& p : polys_) ps.push_back(p.scaled(lambda));
        return PolySystem(std::move(ps));
    }

private:
    std::vector<HomogeneousPoly> polys_;
};

inline SystemNorms system_norms(const PolySystem& f) { return f.norms(); }

struct ModelConstants {
    int max_degree = 0;           ///< maximum of the d_i
    std::uint64_t bezout = 0;     ///< product of the d_i
    std::uint64_t dim = 0;        ///< N = sum_i C(n + d_i, n)
};

inline ModelConstants model_constants(const std::vector<int>& degrees, int n) {
    if (n < 1) throw std::invalid_argument("model_constants: n must be >= 1");
    if (static_cast<int>(degrees.size()) != n)
        throw std::invalid_argument("model_constants: need exactly n degrees");
    ModelConstants c;
    c.bezout = 1;
    for (int d : degrees) {
        if (d < 1) throw std::invalid_argument("model_constants: degrees must be >= 1");
        c.max_degree = std::max(c.max_degree, d);
        c.bezout = detail::checked_mul(c.bezout, static_cast<std::uint64_t>(d));
        c.dim = detail::checked_add(c.dim, binomial(n + d, n));
    }
    return c;
}

}  // namespace polycond
