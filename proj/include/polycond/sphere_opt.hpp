#pragma once

// Multistart local minimization on the unit sphere S^n in R^{n+1}.
//
// Local step: projected BFGS in ambient coordinates, retraction x -> x/|x|,
// Armijo backtracking. Gradients come from the objective when it can supply
// them, otherwise from central differences along a tangent frame. When two
// difference steps disagree by more than 10% the objective is treated as
// non-smooth there and the search switches to golden-section sweeps along
// tangent directions plus a pattern direction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "linalg.hpp"
#include "rng.hpp"

namespace polycond {

struct OptimizerOptions {
    int starts = 0;             ///< 0 selects 8 (n+1)^2
    double tol = 1e-8;          ///< projected-gradient norm at which a start counts as converged
    int max_iter = 200;
    double fd_step = 1e-5;      ///< finite-difference steps are fd_step and 10 * fd_step
    double step_tol = 1e-10;
    std::uint64_t seed = 0;     ///< start points come from RngStream(seed, stream_id)
    std::uint64_t stream_id = make_stream_id(StreamTag::optimizer_starts, 0);

    int effective_starts(int n) const { return starts > 0 ? starts : 8 * (n + 1) * (n + 1); }
};

struct LocalResult {
    Vector x;
    double value = std::numeric_limits<double>::infinity();
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool used_fd = false;
    bool used_golden = false;
};

struct MultistartResult {
    LocalResult best;
    int best_index = -1;
    int starts_used = 0;
    int converged_starts = 0;
};

inline Vector retract(const Vector& x) { return x / x.norm(); }

inline Vector project_tangent(const Vector& x, const Vector& v) { return v - x.dot(v) * x; }

inline Vector uniform_on_sphere(int dim, RngStream& rng) {
    Vector v(dim);
    do {
        for (int k = 0; k < dim; ++k) v[k] = rng.normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

/// The i-th start depends only on (seed, stream_id, i): asking for more starts
/// extends the list without changing its prefix.
inline std::vector<Vector> sphere_starts(int dim, int count, std::uint64_t seed, std::uint64_t stream_id) {
    RngStream rng(seed, stream_id);
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(uniform_on_sphere(dim, rng));
    return out;
}

namespace detail {

template <class Objective>
struct Counted {
    Objective& obj;
    int evals = 0;
    double operator()(const Vector& x) {
        ++evals;
        return obj.value(x);
    }
    double with_gradient(const Vector& x, std::optional<Vector>& g) {
        ++evals;
        return obj.value_and_gradient(x, g);
    }
};

template <class F>
Vector fd_gradient(F& f, const Vector& x, double h) {
    const Matrix basis = householder_tangent_basis(x);
    Vector g = Vector::Zero(x.size());
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
        const Vector b = basis.col(k);
        const double fp = f(retract(x + h * b));
        const double fm = f(retract(x - h * b));
        g += (fp - fm) / (2.0 * h) * b;
    }
    return g;
}

/// Golden-section minimum of phi on [lo, hi]; returns (t, phi(t)).
template <class Phi>
std::pair<double, double> golden_section(Phi& phi, double lo, double hi, double tol) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = phi(c), fd = phi(d);
    while (b - a > tol) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = phi(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = phi(d);
        }
    }
    return fc <= fd ? std::pair{c, fc} : std::pair{d, fd};
}

/// Derivative-free polish: line searches along the tangent frame and along the
/// net displacement of the previous sweep, shrinking the radius when stuck.
template <class F>
void golden_sweeps(F& f, LocalResult& res, double radius, double min_radius, int max_sweeps) {
    res.used_golden = true;
    Vector pattern = Vector::Zero(res.x.size());
    for (int sweep = 0; sweep < max_sweeps && radius > min_radius; ++sweep) {
        const Vector start = res.x;
        const double start_val = res.value;
        std::vector<Vector> dirs;
        const Matrix basis = householder_tangent_basis(res.x);
        for (Eigen::Index k = 0; k < basis.cols(); ++k) dirs.push_back(basis.col(k));
        const Vector pt = project_tangent(res.x, pattern);
        if (pt.norm() > 1e-14) dirs.push_back(pt / pt.norm());
        for (const Vector& dir_in : dirs) {
            const Vector dir = project_tangent(res.x, dir_in).normalized();
            const Vector x0 = res.x;
            auto phi = [&](double t) { return f(retract(x0 + t * dir)); };
            const auto [t, v] = golden_section(phi, -radius, radius, radius * 1e-3);
            if (v < res.value) {
                res.value = v;
                res.x = retract(x0 + t * dir);
            }
        }
        pattern = res.x - start;
        if (!(res.value < start_val)) radius *= 0.25;
        ++res.iterations;
    }
}

}  // namespace detail

/// Local minimization from x0. Objective must provide
///   double value(const Vector& x)
///   double value_and_gradient(const Vector& x, std::optional<Vector>& g)
///       // g is the projected gradient, or nullopt when unavailable at x
///   bool nonsmooth() const   // always polish with golden sweeps
template <class Objective>
LocalResult minimize_on_sphere(Objective& obj, const Vector& x0, const OptimizerOptions& opt) {
    detail::Counted<Objective> f{obj};
    LocalResult res;
    res.x = retract(x0);
    const Eigen::Index m = res.x.size();
    Matrix hinv = Matrix::Identity(m, m);

    // analytic gradient if the objective supplied one, else two-step differences
    auto finish_grad = [&](const Vector& x, std::optional<Vector>& ag, bool& smooth) -> Vector {
        smooth = true;
        if (ag) return *ag;
        res.used_fd = true;
        const Vector g1 = detail::fd_gradient(f, x, opt.fd_step);
        const Vector g2 = detail::fd_gradient(f, x, 10.0 * opt.fd_step);
        const double scale = std::max(g1.norm(), g2.norm());
        if (scale > opt.tol && (g1 - g2).norm() > 0.1 * scale) smooth = false;
        return g1;
    };

    bool smooth = true;
    std::optional<Vector> ag;
    res.value = f.with_gradient(res.x, ag);
    Vector g = finish_grad(res.x, ag, smooth);
    bool need_polish = obj.nonsmooth();
    while (res.iterations < opt.max_iter) {
        if (!smooth) {
            need_polish = true;
            break;
        }
        if (g.norm() < opt.tol) {
            res.converged = true;
            break;
        }
        const Matrix proj = Matrix::Identity(m, m) - res.x * res.x.transpose();
        hinv = proj * hinv * proj;
        Vector p = -(hinv * g);
        if (p.dot(g) >= 0.0) {
            hinv = proj;
            p = -g;
        }
        if (p.norm() > 0.5) p *= 0.5 / p.norm();
        const double slope = g.dot(p);
        double t = 1.0;
        Vector xn;
        double vn = 0.0;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            xn = retract(res.x + t * p);
            vn = f.with_gradient(xn, ag);
            if (vn <= res.value + 1e-4 * t * slope) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        ++res.iterations;
        if (!accepted) {
            // no descent possible at working precision
            res.converged = g.norm() < std::sqrt(opt.tol);
            need_polish = need_polish || !res.converged;
            break;
        }
        const double step = (xn - res.x).norm();
        Vector gn = finish_grad(xn, ag, smooth);
        const Vector s = project_tangent(xn, xn - res.x);
        const Vector yv = gn - project_tangent(xn, g);
        res.x = xn;
        res.value = vn;
        g = gn;
        if (step < opt.step_tol) {
            res.converged = true;
            break;
        }
        const double sy = s.dot(yv);
        if (sy > 1e-16 * s.norm() * yv.norm() && sy > 0.0) {
            const double rho = 1.0 / sy;
            const Matrix id = Matrix::Identity(m, m);
            hinv = (id - rho * s * yv.transpose()) * hinv * (id - rho * yv * s.transpose()) + rho * s * s.transpose();
        } else {
            hinv = Matrix::Identity(m, m) - xn * xn.transpose();
        }
    }
    if (need_polish) {
        detail::golden_sweeps(f, res, 0.05, 1e-11, opt.max_iter);
        res.converged = true;
    }
    res.evaluations = f.evals;
    return res;
}

/// Runs every start and keeps the lowest value, breaking ties on the lowest index.
template <class Objective>
MultistartResult multistart_minimize(Objective& obj, const std::vector<Vector>& starts, const OptimizerOptions& opt) {
    MultistartResult out;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        LocalResult r = minimize_on_sphere(obj, starts[i], opt);
        ++out.starts_used;
        if (r.converged) ++out.converged_starts;
        if (out.best_index < 0 || r.value < out.best.value) {
            out.best = std::move(r);
            out.best_index = static_cast<int>(i);
        }
    }
    return out;
}

}  // namespace polycond
