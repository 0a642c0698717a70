#pragma once

// Gaussian (Kostlan / Shub-Smale) random systems: coefficient a_j of f_i is
// N(0, C(d_i, j)), so E f(x) f(y) = <x, y>^d. Also the closed-form jet
// covariances at e_0 and the chi-square large-deviation helpers.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "poly_core.hpp"
#include "rng.hpp"

namespace polycond {

inline HomogeneousPoly sample_poly(int num_vars, int degree, RngStream& rng) {
    HomogeneousPoly p(num_vars, degree);
    for (std::size_t t = 0; t < p.size(); ++t) p.set_coeff(t, std::sqrt(p.weight(t)) * rng.normal());
    return p;
}

/// Draws f_1..f_n in order, each coefficient in layout order from one stream.
inline PolySystem sample_system(const std::vector<int>& degrees, int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_system: n must be >= 1");
    if (static_cast<int>(degrees.size()) != n) throw std::invalid_argument("sample_system: need exactly n degrees");
    std::vector<HomogeneousPoly> polys;
    polys.reserve(degrees.size());
    for (int d : degrees) {
        if (d < 1) throw std::invalid_argument("sample_system: degrees must be >= 1");
        polys.push_back(sample_poly(n + 1, d, rng));
    }
    return PolySystem(std::move(polys));
}

/// One entry of the 2-jet of f at e_0: the value, a first partial, or a second partial.
struct JetEntry {
    enum class Order { value = 0, first = 1, second = 2 };
    Order order = Order::value;
    int k = 0;
    int l = 0;

    static JetEntry value() { return {Order::value, 0, 0}; }
    static JetEntry first(int k) { return {Order::first, k, 0}; }
    static JetEntry second(int k, int l) { return {Order::second, k, l}; }
};

namespace detail {
inline double kd(int a, int b) { return a == b ? 1.0 : 0.0; }
}  // namespace detail

/// Closed-form E[u v] for u, v entries of the jet of a degree-d random f at e_0,
/// in n+1 variables. Indices must lie in [0, n].
inline double jet_covariance_oracle(int d, int n, JetEntry u, JetEntry v) {
    using detail::kd;
    if (d < 1) throw std::invalid_argument("jet_covariance_oracle: degree must be >= 1");
    for (const JetEntry* e : {&u, &v}) {
        const bool bad_k = e->order != JetEntry::Order::value && (e->k < 0 || e->k > n);
        const bool bad_l = e->order == JetEntry::Order::second && (e->l < 0 || e->l > n);
        if (bad_k || bad_l) throw std::out_of_range("jet_covariance_oracle: index out of range");
    }
    if (u.order > v.order) std::swap(u, v);
    const double D = d;
    const double d1 = D * (D - 1.0);
    using O = JetEntry::Order;
    if (u.order == O::value && v.order == O::value) return 1.0;
    if (u.order == O::value && v.order == O::first) return kd(v.k, 0) * D;
    if (u.order == O::value && v.order == O::second) return kd(v.k, v.l) * kd(v.k, 0) * d1;
    if (u.order == O::first && v.order == O::first) return kd(u.k, v.k) * (D + kd(u.k, 0) * d1);
    if (u.order == O::first && v.order == O::second) {
        const int kp = u.k, k = v.k, l = v.l;
        return d1 * ((D - 2.0) * kd(l, 0) * kd(k, 0) * kd(kp, 0) + kd(k, 0) * kd(kp, l) + kd(l, 0) * kd(k, kp));
    }
    const int k = u.k, l = u.l, kp = v.k, lp = v.l;
    return d1 * ((D - 2.0) * (D - 3.0) * kd(k, 0) * kd(l, 0) * kd(kp, 0) * kd(lp, 0) +
                 (D - 2.0) * (kd(k, 0) * kd(kp, 0) * kd(l, lp) + kd(kp, 0) * kd(l, 0) * kd(k, lp) +
                              kd(k, 0) * kd(lp, 0) * kd(kp, l) + kd(l, 0) * kd(lp, 0) * kd(k, kp)) +
                 kd(k, kp) * kd(l, lp) + kd(k, lp) * kd(kp, l));
}

/// All jet entries in a fixed order: value, first partials 0..n, then second
/// partials (k <= l) in row-major order.
inline std::vector<JetEntry> jet_entries(int n) {
    std::vector<JetEntry> out{JetEntry::value()};
    for (int k = 0; k <= n; ++k) out.push_back(JetEntry::first(k));
    for (int k = 0; k <= n; ++k)
        for (int l = k; l <= n; ++l) out.push_back(JetEntry::second(k, l));
    return out;
}

/// Covariance matrix of the jet at e_0, from the closed forms.
struct CovarianceSpec {
    int d = 0;
    int n = 0;
    std::vector<JetEntry> entries;
    Matrix cov;
};

inline CovarianceSpec jet_covariance(int d, int n) {
    CovarianceSpec s{d, n, jet_entries(n), {}};
    const auto m = static_cast<Eigen::Index>(s.entries.size());
    s.cov.resize(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            s.cov(a, b) = jet_covariance_oracle(d, n, s.entries[static_cast<std::size_t>(a)],
                                                s.entries[static_cast<std::size_t>(b)]);
    return s;
}

/// Values of the jet entries for a concrete polynomial at e_0.
inline Vector jet_at_e0(const HomogeneousPoly& f, const std::vector<JetEntry>& entries) {
    Vector e0 = Vector::Zero(f.num_vars());
    e0[0] = 1.0;
    const double v = f.eval(e0);
    const Vector g = f.gradient(e0);
    const Matrix h = f.hessian(e0);
    Vector out(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t a = 0; a < entries.size(); ++a) {
        const auto& e = entries[a];
        switch (e.order) {
            case JetEntry::Order::value: out[static_cast<Eigen::Index>(a)] = v; break;
            case JetEntry::Order::first: out[static_cast<Eigen::Index>(a)] = g[e.k]; break;
            case JetEntry::Order::second: out[static_cast<Eigen::Index>(a)] = h(e.k, e.l); break;
        }
    }
    return out;
}

/// P(||f||_W^2 >= (1 + eta) N) <= exp(-(N/2)(eta - ln(1 + eta))).
inline double weyl_sq_tail_bound(double eta, double N) {
    if (!(eta > 0.0)) throw std::invalid_argument("weyl_sq_tail_bound: eta must be > 0");
    if (!(N > 0.0)) throw std::invalid_argument("weyl_sq_tail_bound: N must be > 0");
    return std::exp(-0.5 * N * (eta - std::log1p(eta)));
}

/// Log-MGF of a centered chi-square(1) variable, xi^2 - 1.
inline double logmgf_chi2_centered(double lambda) {
    if (lambda >= 0.5) return std::numeric_limits<double>::infinity();
    return -lambda - 0.5 * std::log1p(-2.0 * lambda);
}

/// Legendre conjugate of logmgf_chi2_centered.
inline double fenchel_transform(double x) {
    if (x <= -1.0) return std::numeric_limits<double>::infinity();
    return 0.5 * (x - std::log1p(x));
}

}  // namespace polycond
