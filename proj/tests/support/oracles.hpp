#pragma once

// Independent reference computations for the tests. None of these reuse the
// library's derivative, optimizer or determinant code paths.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include <polycond/polycond.hpp>

namespace oracle {

using polycond::Matrix;
using polycond::Vector;

/// sum_t a_t prod_k x_k^{e_tk}, using std::pow and nothing else.
inline double naive_eval(const polycond::HomogeneousPoly& p, const Vector& x) {
    double s = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) {
        double m = p.coeff(t);
        for (int k = 0; k < p.num_vars(); ++k) m *= std::pow(x[k], p.exponent(t, k));
        s += m;
    }
    return s;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vector a = x, b = x;
        a[k] += h;
        b[k] -= h;
        g[k] = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

inline Matrix fd_hessian(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    const Eigen::Index m = x.size();
    Matrix H(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b) {
            auto at = [&](double sa, double sb) {
                Vector y = x;
                y[a] += sa * h;
                y[b] += sb * h;
                return f(y);
            };
            H(a, b) = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h * h);
        }
    return H;
}

inline Vector random_gaussian(int dim, polycond::RngStream& rng) {
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = rng.normal();
    return v;
}

inline Vector random_unit(int dim, polycond::RngStream& rng) {
    const Vector v = random_gaussian(dim, rng);
    return v / v.norm();
}

inline Matrix random_orthogonal(int dim, polycond::RngStream& rng) {
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    return q;
}

/// Coefficients of g(x) = f(U^t x), obtained by interpolation: g is sampled
/// at enough points to determine it and the dense coefficients are solved for.
inline polycond::HomogeneousPoly compose_orthogonal(const polycond::HomogeneousPoly& p, const Matrix& u,
                                                    polycond::RngStream& rng) {
    const auto m = static_cast<Eigen::Index>(p.size());
    Matrix a(2 * m, m);
    Vector rhs(2 * m);
    polycond::HomogeneousPoly basis(p.num_vars(), p.degree());
    for (Eigen::Index r = 0; r < 2 * m; ++r) {
        const Vector x = random_gaussian(p.num_vars(), rng);
        for (Eigen::Index t = 0; t < m; ++t) {
            double mono = 1.0;
            for (int k = 0; k < p.num_vars(); ++k) mono *= std::pow(x[k], basis.exponent(static_cast<std::size_t>(t), k));
            a(r, t) = mono;
        }
        rhs[r] = naive_eval(p, u.transpose() * x);
    }
    const Vector c = a.colPivHouseholderQr().solve(rhs);
    std::vector<double> coeffs(c.data(), c.data() + c.size());
    return polycond::HomogeneousPoly(p.num_vars(), p.degree(), coeffs);
}

inline polycond::PolySystem compose_orthogonal(const polycond::PolySystem& f, const Matrix& u, polycond::RngStream& rng) {
    std::vector<polycond::HomogeneousPoly> ps;
    for (const auto& p : f.polys()) ps.push_back(compose_orthogonal(p, u, rng));
    return polycond::PolySystem(std::move(ps));
}

/// For n = 1: minimum of sigma_min^2 + ||f||^2 over the unit circle, by a scan
/// of `points` equally spaced angles refined with golden section around the
/// best one. Evaluates L directly from the definition at y = x-perp.
inline double circle_min_L(const polycond::PolySystem& f, int points = 10000) {
    auto g = [&](double th) {
        Vector x(2), y(2);
        x << std::cos(th), std::sin(th);
        y << -std::sin(th), std::cos(th);
        double s = 0.0;
        for (int i = 0; i < f.n(); ++i) {
            const auto& p = f[static_cast<std::size_t>(i)];
            const auto fx = [&](const Vector& z) { return naive_eval(p, z); };
            const double dy = fd_gradient(fx, x, 1e-6).dot(y);
            const double v = naive_eval(p, x);
            s += dy * dy / p.degree() + v * v;
        }
        return s;
    };
    const double step = 2 * std::numbers::pi / points;
    int best = 0;
    double best_v = g(0.0);
    for (int k = 1; k < points; ++k) {
        const double v = g(k * step);
        if (v < best_v) best_v = v, best = k;
    }
    double lo = (best - 1) * step, hi = (best + 1) * step;
    const double r = (std::sqrt(5.0) - 1) / 2;
    double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
    double gc = g(c), gd = g(d);
    for (int it = 0; it < 100; ++it) {
        if (gc < gd) {
            hi = d, d = c, gd = gc;
            c = hi - r * (hi - lo), gc = g(c);
        } else {
            lo = c, c = d, gc = gd;
            d = lo + r * (hi - lo), gd = g(d);
        }
    }
    return std::min({best_v, gc, gd});
}

/// min over a grid of unit y perpendicular to x (n = 2: a circle in x-perp) of
/// sum_i (grad f_i(x) . y)^2 / d_i + ||f(x)||^2.
inline double min_L_over_y_grid(const polycond::PolySystem& f, const Vector& x, int points = 20000) {
    const Matrix basis = Eigen::FullPivHouseholderQR<Matrix>(x).matrixQ().rightCols(x.size() - 1);
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < points; ++k) {
        const double th = 2 * std::numbers::pi * k / points;
        const Vector y = std::cos(th) * basis.col(0) + std::sin(th) * basis.col(1);
        double s = 0.0;
        for (int i = 0; i < f.n(); ++i) {
            const auto& p = f[static_cast<std::size_t>(i)];
            const auto fx = [&](const Vector& z) { return naive_eval(p, z); };
            const double dy = fd_gradient(fx, x, 1e-6).dot(y);
            const double v = naive_eval(p, x);
            s += dy * dy / p.degree() + v * v;
        }
        best = std::min(best, s);
    }
    return best;
}

/// Monte Carlo volume of V (orthonormal pairs in R^m) from the measure of its
/// eps-tube: a pair (x, y) is within eps of V when the 2 singular values s of
/// [x y] satisfy sum (s - 1)^2 < eps^2, the distance to the polar factor. The
/// tube lies in the product of two spherical shells, which is sampled
/// uniformly. Tube volume = vol(V) * (4/3) pi eps^3 up to O(eps^2) relative.
struct TubeEstimate {
    double volume = 0.0;
    double se = 0.0;
};

inline TubeEstimate stiefel_tube_volume(int m, double eps, std::int64_t samples, polycond::RngStream& rng) {
    auto shell_point = [&]() {
        const Vector dir = random_unit(m, rng);
        const double lo = std::pow(1 - eps, m), hi = std::pow(1 + eps, m);
        const double r = std::pow(lo + (hi - lo) * rng.uniform(), 1.0 / m);
        return Vector(r * dir);
    };
    std::int64_t hits = 0;
    for (std::int64_t t = 0; t < samples; ++t) {
        const Vector x = shell_point(), y = shell_point();
        const double a = x.squaredNorm(), b = y.squaredNorm(), c = x.dot(y);
        const double tr = a + b, disc = std::sqrt(std::max(0.0, (a - b) * (a - b) + 4 * c * c));
        const double s1 = std::sqrt(0.5 * (tr + disc)), s2 = std::sqrt(std::max(0.0, 0.5 * (tr - disc)));
        if ((s1 - 1) * (s1 - 1) + (s2 - 1) * (s2 - 1) < eps * eps) ++hits;
    }
    const double shell = polycond::sphere_area(m - 1) * (std::pow(1 + eps, m) - std::pow(1 - eps, m)) / m;
    const double box = shell * shell;
    const double p = static_cast<double>(hits) / static_cast<double>(samples);
    const double ball = 4.0 / 3.0 * std::numbers::pi * eps * eps * eps;
    return {p * box / ball, std::sqrt(p * (1 - p) / static_cast<double>(samples)) * box / ball};
}

}  // namespace oracle
