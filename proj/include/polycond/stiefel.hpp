#pragma once

// The manifold V of orthonormal pairs (x, y) in R^{n+1}, an explicit chart
// around (e_0, e_1), and the Hessian of L composed with that chart at 0
// assembled from free derivatives of L.
//
// Chart coordinates are ordered (s_2..s_n, t_2..t_n, theta); for n = 1 only
// theta exists. Tangent and curvature vectors of V are stored stacked as
// (x-part; y-part), length 2(n+1).

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "condition.hpp"
#include "poly_core.hpp"

namespace polycond {

struct ChartCoords {
    Vector sigma;  ///< length n-1
    Vector tau;    ///< length n-1
    double theta = 0.0;

    static ChartCoords zero(int n) { return {Vector::Zero(n - 1), Vector::Zero(n - 1), 0.0}; }

    int n() const { return static_cast<int>(sigma.size()) + 1; }
    int dim() const { return 2 * n() - 1; }

    /// Flat vector in chart order.
    Vector flat() const {
        Vector v(dim());
        v << sigma, tau, theta;
        return v;
    }
    static ChartCoords from_flat(const Vector& v) {
        if (v.size() % 2 == 0) throw std::invalid_argument("ChartCoords: flat length must be 2n-1");
        const Eigen::Index m = (v.size() - 1) / 2;
        return {v.head(m), v.segment(m, m), v[v.size() - 1]};
    }
};

inline StiefelPoint chart_psi(const ChartCoords& c) {
    if (c.sigma.size() != c.tau.size()) throw std::invalid_argument("chart_psi: sigma and tau differ in length");
    const int n = c.n();
    const double ss = c.sigma.squaredNorm(), tt = c.tau.squaredNorm();
    if (!(ss < 1.0) || !(tt < 1.0) || !std::isfinite(c.theta))
        throw std::domain_error("chart_psi: coordinates outside the chart domain");
    const double s1 = std::sqrt(1.0 - ss);
    const double t1 = std::sqrt(1.0 - tt);
    const double a = -c.sigma.dot(c.tau) / (s1 + t1);
    const double nn = std::sqrt(1.0 + a * a);

    Vector A = Vector::Zero(n + 1), B = Vector::Zero(n + 1);
    A[0] = s1;
    A[1] = a;
    B[1] = t1;
    B[0] = a;
    for (int j = 2; j <= n; ++j) {
        A[j] = c.sigma[j - 2];
        B[j] = c.tau[j - 2];
    }
    A /= nn;
    B /= nn;
    const double ct = std::cos(c.theta / std::numbers::sqrt2), st = std::sin(c.theta / std::numbers::sqrt2);
    Vector C = ct * A, D = ct * B;
    C[1] += st * s1;
    D[0] -= st * t1;
    return StiefelPoint(C / C.norm(), D / D.norm());
}

namespace detail {
inline Vector stacked(const Vector& x, const Vector& y) {
    Vector v(x.size() + y.size());
    v << x, y;
    return v;
}
inline Vector unit(int dim, int k) {
    Vector v = Vector::Zero(dim);
    v[k] = 1.0;
    return v;
}
}  // namespace detail

/// d psi / du_a at 0 for each chart coordinate, in chart order.
inline std::vector<Vector> chart_first_derivs(int n) {
    if (n < 1) throw std::invalid_argument("chart_first_derivs: n must be >= 1");
    using detail::stacked;
    using detail::unit;
    const int m = n + 1;
    const Vector z = Vector::Zero(m);
    std::vector<Vector> out;
    for (int j = 2; j <= n; ++j) out.push_back(stacked(unit(m, j), z));
    for (int j = 2; j <= n; ++j) out.push_back(stacked(z, unit(m, j)));
    out.push_back(stacked(unit(m, 1), -unit(m, 0)) / std::numbers::sqrt2);
    return out;
}

/// d^2 psi / du_a du_b at 0, indexed [a][b] in chart order.
inline std::vector<std::vector<Vector>> chart_second_derivs(int n) {
    if (n < 1) throw std::invalid_argument("chart_second_derivs: n must be >= 1");
    using detail::stacked;
    using detail::unit;
    const int m = n + 1;
    const int dim = 2 * n - 1;
    const Vector z = Vector::Zero(2 * m);
    std::vector<std::vector<Vector>> t(static_cast<std::size_t>(dim), std::vector<Vector>(static_cast<std::size_t>(dim), z));
    auto at = [&](int a, int b) -> Vector& { return t[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; };
    const Vector zm = Vector::Zero(m);
    const int th = dim - 1;
    for (int j = 0; j < n - 1; ++j) {
        const int sj = j, tj = (n - 1) + j;
        at(sj, sj) = stacked(-unit(m, 0), zm);
        at(tj, tj) = stacked(zm, -unit(m, 1));
        at(sj, tj) = at(tj, sj) = -0.5 * stacked(unit(m, 1), unit(m, 0));
    }
    at(th, th) = -0.5 * stacked(unit(m, 0), unit(m, 1));
    return t;
}

/// Free first and second derivatives of L(x, y) treated as a function on
/// R^{n+1} x R^{n+1}. Lxy(k, l) = d^2 L / dx_k dy_l.
struct LDerivatives {
    double value = 0.0;
    Vector Lx, Ly;
    Matrix Lxx, Lxy, Lyy;
};

inline LDerivatives L_free_derivatives(const PolySystem& f, const Vector& x, const Vector& y) {
    const Eigen::Index m = f.num_vars();
    if (x.size() != m || y.size() != m) throw std::invalid_argument("L_free_derivatives: dimension mismatch");
    LDerivatives r;
    r.Lx = Vector::Zero(m);
    r.Ly = Vector::Zero(m);
    r.Lxx = Matrix::Zero(m, m);
    r.Lxy = Matrix::Zero(m, m);
    r.Lyy = Matrix::Zero(m, m);
    for (int i = 0; i < f.n(); ++i) {
        const auto& p = f[static_cast<std::size_t>(i)];
        const double w = 2.0 / p.degree();
        const double fi = p.eval(x);
        const Vector g = p.gradient(x);
        const Matrix h = p.hessian(x);
        const double s = g.dot(y);
        const Vector hy = h * y;
        r.value += s * s / p.degree() + fi * fi;
        r.Lx += w * s * hy + 2.0 * fi * g;
        r.Ly += w * s * g;
        r.Lxx += w * (hy * hy.transpose() + s * p.hessian_derivative(x, y)) + 2.0 * (g * g.transpose() + fi * h);
        r.Lxy += w * (hy * g.transpose() + s * h);
        r.Lyy += w * g * g.transpose();
    }
    return r;
}

struct HessianBlocks {
    Matrix M_ss, M_st, M_tt;  ///< (n-1) x (n-1)
    Vector M_s_theta, M_t_theta;        ///< n-1
    double M_theta_theta = 0.0;

    /// Full symmetric (2n-1) x (2n-1) matrix in chart order.
    Matrix assembled() const {
        const Eigen::Index k = M_ss.rows();
        Matrix out(2 * k + 1, 2 * k + 1);
        out.block(0, 0, k, k) = M_ss;
        out.block(0, k, k, k) = M_st;
        out.block(k, 0, k, k) = M_st.transpose();
        out.block(k, k, k, k) = M_tt;
        out.block(0, 2 * k, k, 1) = M_s_theta;
        out.block(2 * k, 0, 1, k) = M_s_theta.transpose();
        out.block(k, 2 * k, k, 1) = M_t_theta;
        out.block(2 * k, k, 1, k) = M_t_theta.transpose();
        out(2 * k, 2 * k) = M_theta_theta;
        return out;
    }
};

/// Hessian of u -> L(psi(u)) at u = 0, from the free derivatives at (e_0, e_1).
inline HessianBlocks hessian_in_chart(const PolySystem& f) {
    const int n = f.n();
    const int m = n + 1;
    const auto d = L_free_derivatives(f, detail::unit(m, 0), detail::unit(m, 1));
    const Eigen::Index k = n - 1;
    HessianBlocks b;
    b.M_ss.resize(k, k);
    b.M_st.resize(k, k);
    b.M_tt.resize(k, k);
    b.M_s_theta.resize(k);
    b.M_t_theta.resize(k);
    for (int j = 2; j <= n; ++j) {
        for (int l = 2; l <= n; ++l) {
            const bool diag = j == l;
            b.M_ss(j - 2, l - 2) = d.Lxx(j, l) - (diag ? d.Lx[0] : 0.0);
            b.M_st(j - 2, l - 2) = d.Lxy(j, l) - (diag ? 0.5 * (d.Lx[1] + d.Ly[0]) : 0.0);
            b.M_tt(j - 2, l - 2) = d.Lyy(j, l) - (diag ? d.Ly[1] : 0.0);
        }
        b.M_s_theta[j - 2] = (d.Lxx(j, 1) - d.Lxy(j, 0)) / std::numbers::sqrt2;
        b.M_t_theta[j - 2] = (d.Lxy(1, j) - d.Lyy(j, 0)) / std::numbers::sqrt2;
    }
    b.M_theta_theta = 0.5 * (d.Lxx(1, 1) - 2.0 * d.Lxy(1, 0) + d.Lyy(0, 0) - d.Lx[0] - d.Ly[1]);
    return b;
}

/// L(psi(c)), for finite-difference checks of hessian_in_chart.
inline double L_in_chart(const PolySystem& f, const ChartCoords& c) { return L_field(f, chart_psi(c)); }

/// Surface measure of the unit k-sphere S^k in R^{k+1}.
inline double sphere_area(int k) {
    if (k < 0) throw std::invalid_argument("sphere_area: k must be >= 0");
    const double h = 0.5 * (k + 1);
    return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

/// Total measure of V for pairs in R^{n+1}: sqrt(2) |S^{n-1}| |S^n|.
inline double stiefel_volume(int n) {
    if (n < 1) throw std::invalid_argument("stiefel_volume: n must be >= 1");
    return std::numbers::sqrt2 * sphere_area(n - 1) * sphere_area(n);
}

}  // namespace polycond
