#pragma once

// Condition numbers of a real homogeneous system f = (f_1..f_n) in n+1
// variables.
//
//   mu_norm(f, x)   = sqrt(n) |f| / sigma_min(M^-1 D_x f),   M = diag(sqrt(d_i))
//   kappa(f)        = max_x min(mu_norm(f, x), |f| / |f(x)|_inf)       (|f| = max-Weyl)
//   L(x, y)         = sum_i (grad f_i(x).y)^2 / d_i + sum_i f_i(x)^2,  y unit, y _|_ x
//   L_underline     = min over (x, y) of L
//   kappa_tilde(f)  = |f|_W / sqrt(L_underline)                        (|f|_W = L2-Weyl)
//
// Both extrema are multistart estimates. The multistart minimum of L can only
// overestimate the true minimum, so kappa_tilde is reported as a lower
// estimate; likewise kappa.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "linalg.hpp"
#include "poly_core.hpp"
#include "sphere_opt.hpp"

namespace polycond {

struct SpherePoint {
    Vector coords;

    SpherePoint() = default;
    explicit SpherePoint(Vector v) : coords(std::move(v)) {
        if (coords.size() < 1 || std::abs(coords.norm() - 1.0) > 1e-12)
            throw std::invalid_argument("SpherePoint: vector is not unit length");
    }
    static SpherePoint normalized(const Vector& v) {
        if (!(v.norm() > 0.0)) throw std::invalid_argument("SpherePoint: zero vector");
        return SpherePoint(v / v.norm());
    }
    static SpherePoint basis(int dim, int k) {
        Vector v = Vector::Zero(dim);
        v[k] = 1.0;
        return SpherePoint(v);
    }
    Eigen::Index size() const { return coords.size(); }
};

struct StiefelPoint {
    Vector x;
    Vector y;

    StiefelPoint() = default;
    StiefelPoint(Vector x_, Vector y_) : x(std::move(x_)), y(std::move(y_)) {
        if (x.size() != y.size()) throw std::invalid_argument("StiefelPoint: x and y differ in length");
        if (std::abs(x.norm() - 1.0) > 1e-12 || std::abs(y.norm() - 1.0) > 1e-12 || std::abs(x.dot(y)) > 1e-12)
            throw std::invalid_argument("StiefelPoint: (x, y) is not an orthonormal pair");
    }
};

struct TangentFrame {
    Vector x;
    Matrix basis;  ///< (n+1) x n, orthonormal columns spanning x-perp

    static TangentFrame at(const SpherePoint& p) { return {p.coords, householder_tangent_basis(p.coords)}; }
};

enum class Certification { heuristic };

inline std::string to_string(Certification) { return "heuristic"; }

struct ConditionReport {
    double kappa_tilde = std::numeric_limits<double>::quiet_NaN();
    double kappa = std::numeric_limits<double>::quiet_NaN();  ///< NaN when not computed
    double L_underline = std::numeric_limits<double>::quiet_NaN();
    SpherePoint argmin_x;  ///< where L_underline was found
    SpherePoint argmax_x;  ///< where kappa was found
    int starts_used = 0;
    int converged_starts = 0;
    bool converged = false;     ///< the winning start(s) converged
    bool used_fallback = false; ///< finite differences or golden sweeps were needed
    Certification certification = Certification::heuristic;

    bool has_kappa() const { return !std::isnan(kappa); }
    bool has_kappa_tilde() const { return !std::isnan(kappa_tilde); }
};

namespace detail {

inline void check_point(const PolySystem& f, const Vector& x) {
    if (x.size() != f.num_vars())
        throw std::invalid_argument("condition: point has " + std::to_string(x.size()) + " coordinates, expected " +
                                    std::to_string(f.num_vars()));
}

/// M^-1 Df(x): row i is grad f_i(x)^T / sqrt(d_i), n x (n+1).
inline Matrix scaled_jacobian(const PolySystem& f, const Vector& x) {
    Matrix a = f.jacobian(x);
    for (int i = 0; i < f.n(); ++i) a.row(i) /= std::sqrt(static_cast<double>(f[static_cast<std::size_t>(i)].degree()));
    return a;
}

inline void require_nonzero(const PolySystem& f, const char* who) {
    if (f.is_zero()) throw std::invalid_argument(std::string(who) + ": zero system");
}

}  // namespace detail

/// Rows are grad f_i(x)^T restricted to the frame: n x n.
inline Matrix restricted_jacobian(const PolySystem& f, const TangentFrame& frame) {
    detail::check_point(f, frame.x);
    if (frame.basis.rows() != f.num_vars() || frame.basis.cols() != f.n())
        throw std::invalid_argument("restricted_jacobian: frame shape does not match the system");
    return f.jacobian(frame.x) * frame.basis;
}

inline double mu_norm(const PolySystem& f, const SpherePoint& x) {
    detail::check_point(f, x.coords);
    const Matrix a = detail::scaled_jacobian(f, x.coords) * householder_tangent_basis(x.coords);
    const double s = sigma_min(a);
    if (s == 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(static_cast<double>(f.n())) * f.norms().max_weyl / s;
}

inline double L_field(const PolySystem& f, const StiefelPoint& p) {
    detail::check_point(f, p.x);
    const Vector fx = f.eval(p.x);
    const Matrix j = f.jacobian(p.x);
    double s = fx.squaredNorm();
    for (int i = 0; i < f.n(); ++i) {
        const double gy = j.row(i).dot(p.y);
        s += gy * gy / f[static_cast<std::size_t>(i)].degree();
    }
    return s;
}

/// sigma_min(M^-1 D_x f)^2 + |f(x)|^2, which is min over unit y _|_ x of L(x, y).
inline double sigma_min_profile(const PolySystem& f, const SpherePoint& x) {
    detail::check_point(f, x.coords);
    const Matrix a = detail::scaled_jacobian(f, x.coords) * householder_tangent_basis(x.coords);
    const double s = sigma_min(a);
    return s * s + f.eval(x.coords).squaredNorm();
}

namespace detail {

/// Shared scratch space for the objectives: one fused pass over the system
/// gives f(x), Df(x) and, when asked, the Hessians.
class JetScratch {
public:
    explicit JetScratch(const PolySystem& f) : f_(f), inv_sqrt_deg_(f.n()) {
        for (int i = 0; i < f.n(); ++i)
            inv_sqrt_deg_[i] = 1.0 / std::sqrt(static_cast<double>(f[static_cast<std::size_t>(i)].degree()));
    }

    /// Fills values, jac, scaled = M^-1 Df(x) and basis = frame at x.
    void load(const Vector& x, bool with_hessians) {
        f_.jet(x, values, jac, with_hessians ? &hessians : nullptr);
        scaled = inv_sqrt_deg_.asDiagonal() * jac;
        basis = householder_tangent_basis(x);
    }

    /// Tangent gradient of sigma_min(M^-1 D_x f)^2 at the loaded x, given the
    /// right singular direction y (a unit tangent vector).
    Vector sigma_sq_gradient(const Vector& x, const Vector& y) const {
        Vector grad = Vector::Zero(x.size());
        for (int i = 0; i < f_.n(); ++i) {
            const double wi = inv_sqrt_deg_[i] * inv_sqrt_deg_[i];
            const double si = jac.row(i).dot(y);
            grad.noalias() += (2.0 * wi * si) * (hessians[static_cast<std::size_t>(i)] * y);
        }
        grad -= 2.0 * (scaled * x).dot(scaled * y) * y;
        return grad;
    }

    PolySystem f_;
    Vector inv_sqrt_deg_;
    Vector values;
    Matrix jac, scaled, basis;
    std::vector<Matrix> hessians;
};

}  // namespace detail

/// Objective x -> sigma_min_profile with the envelope-theorem gradient.
class ProfileObjective {
public:
    explicit ProfileObjective(const PolySystem& f) : w_(f) {}

    double value(const Vector& x) {
        w_.load(x, false);
        const double s = sigma_min(w_.scaled * w_.basis);
        return s * s + w_.values.squaredNorm();
    }

    /// g is left empty when the two smallest singular values (nearly) coincide.
    double value_and_gradient(const Vector& x, std::optional<Vector>& g) {
        const int n = w_.f_.n();
        w_.load(x, true);
        Eigen::JacobiSVD<Matrix> svd(w_.scaled * w_.basis, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double s1 = sv[n - 1];
        const double val = s1 * s1 + w_.values.squaredNorm();
        g.reset();
        if (n >= 2) {
            const double s2 = sv[n - 2];
            if (s2 * s2 - s1 * s1 <= 1e-7 * std::max(s2 * s2, 1e-300)) return val;
        }
        const Vector y = w_.basis * svd.matrixV().col(n - 1);
        const Vector grad = 2.0 * (w_.jac.transpose() * w_.values) + w_.sigma_sq_gradient(x, y);
        g = project_tangent(x, grad);
        return val;
    }

    std::optional<Vector> gradient(const Vector& x) {
        std::optional<Vector> g;
        value_and_gradient(x, g);
        return g;
    }

    bool nonsmooth() const { return false; }

private:
    detail::JetScratch w_;
};

/// h(x) = max(sigma_min(M^-1 D_x f) / sqrt(n), |f(x)|_inf) for a system scaled
/// to unit max-Weyl norm; kappa = 1 / min h.
class KappaObjective {
public:
    explicit KappaObjective(const PolySystem& f) : w_(f) {}

    double value(const Vector& x) {
        w_.load(x, false);
        const double mu_part = sigma_min(w_.scaled * w_.basis) / std::sqrt(static_cast<double>(w_.f_.n()));
        return std::max(mu_part, w_.values.cwiseAbs().maxCoeff());
    }
    double value_and_gradient(const Vector& x, std::optional<Vector>& g) {
        g.reset();
        return value(x);
    }
    bool nonsmooth() const { return true; }

    /// The n+1 terms of h at x and, in the rows of grads, their tangent
    /// gradients. False when sigma_min is not simple or some term vanishes.
    bool terms(const Vector& x, Vector& vals, Matrix& grads) {
        const int n = w_.f_.n();
        const double rn = std::sqrt(static_cast<double>(n));
        w_.load(x, true);
        Eigen::JacobiSVD<Matrix> svd(w_.scaled * w_.basis, Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double sigma = sv[n - 1];
        if (!(sigma > 0.0)) return false;
        if (n >= 2 && sv[n - 2] * sv[n - 2] - sigma * sigma <= 1e-7 * sv[n - 2] * sv[n - 2]) return false;
        vals.resize(n + 1);
        grads.resize(n + 1, x.size());
        const Vector y = w_.basis * svd.matrixV().col(n - 1);
        vals[0] = sigma / rn;
        grads.row(0) = project_tangent(x, w_.sigma_sq_gradient(x, y) / (2.0 * sigma * rn)).transpose();
        for (int i = 0; i < n; ++i) {
            const double fi = w_.values[i];
            if (fi == 0.0) return false;
            vals[i + 1] = std::abs(fi);
            grads.row(i + 1) = project_tangent(x, (fi > 0.0 ? 1.0 : -1.0) * w_.jac.row(i).transpose()).transpose();
        }
        return true;
    }

private:
    detail::JetScratch w_;
};

/// Smooth stand-in for KappaObjective: the p-norm of (sigma_min / sqrt(n),
/// |f_1|, ..., |f_n|) instead of their maximum. It overestimates h by at most
/// a factor (n+1)^(1/p) and has a gradient away from sigma_min crossings.
class KappaSurrogate {
public:
    KappaSurrogate(const PolySystem& f, double p) : w_(f), p_(p) {}

    double value(const Vector& x) {
        std::optional<Vector> g;
        return eval(x, g, false);
    }
    double value_and_gradient(const Vector& x, std::optional<Vector>& g) { return eval(x, g, true); }
    bool nonsmooth() const { return false; }

private:
    double eval(const Vector& x, std::optional<Vector>& g, bool want_grad) {
        const int n = w_.f_.n();
        const double rn = std::sqrt(static_cast<double>(n));
        w_.load(x, want_grad);
        g.reset();
        Eigen::JacobiSVD<Matrix> svd(w_.scaled * w_.basis, want_grad ? Eigen::ComputeFullV : 0);
        const auto& sv = svd.singularValues();
        const double sigma = sv[n - 1];
        Vector c(n + 1);
        c[0] = sigma / rn;
        c.tail(n) = w_.values.cwiseAbs();
        const double m = c.maxCoeff();
        if (!(m > 0.0)) return 0.0;
        const Vector r = c / m;
        double sum = 0.0;
        for (Eigen::Index k = 0; k <= n; ++k) sum += std::pow(r[k], p_);
        const double val = m * std::pow(sum, 1.0 / p_);
        if (!want_grad) return val;
        if (n >= 2) {
            const double s2 = sv[n - 2];
            if (s2 * s2 - sigma * sigma <= 1e-7 * std::max(s2 * s2, 1e-300)) return val;
        }
        if (!(sigma > 0.0)) return val;
        const double outer = std::pow(sum, 1.0 / p_ - 1.0);
        const Vector y = w_.basis * svd.matrixV().col(n - 1);
        Vector grad = (std::pow(r[0], p_ - 1.0) / (2.0 * sigma * rn)) * w_.sigma_sq_gradient(x, y);
        for (int i = 0; i < n; ++i) {
            const double fi = w_.values[i];
            if (fi == 0.0) continue;
            grad += (std::pow(r[i + 1], p_ - 1.0) * (fi > 0.0 ? 1.0 : -1.0)) * w_.jac.row(i).transpose();
        }
        g = project_tangent(x, outer * grad);
        return val;
    }

    detail::JetScratch w_;
    double p_;
};

namespace detail {

struct HSearch {
    Vector x;
    double h = std::numeric_limits<double>::infinity();
    int starts_used = 0;
    int converged_starts = 0;
    bool converged = false;
    bool used_fallback = false;
};

/// Terms of h and their gradients in the chart u -> retract(x + basis u).
inline bool chart_terms(KappaObjective& exact, const Vector& x, const Matrix& basis, const Vector& u, Vector& vals,
                        Matrix& grads) {
    const Vector z = x + basis * u;
    if (!exact.terms(retract(z), vals, grads)) return false;
    grads = grads * basis / z.norm();
    return true;
}

/// Newton on the optimality system of min t subject to term_k(x) = t for the
/// terms in `active` (indices into the n+1 terms): the terms equal t, a convex
/// combination of their gradients vanishes. The Hessian of the Lagrangian
/// comes from central differences of exact gradients. Keeps the lowest h seen.
inline void active_set_newton(KappaObjective& exact, const std::vector<int>& active, HSearch& out) {
    const auto k = static_cast<Eigen::Index>(active.size());
    Vector x = out.x, vals;
    Matrix grads;
    const Eigen::Index dim = x.size() - 1;
    const Matrix basis0 = householder_tangent_basis(x);
    if (!chart_terms(exact, x, basis0, Vector::Zero(dim), vals, grads)) return;
    Matrix ga(k, dim);
    double t = 0.0;
    for (Eigen::Index a = 0; a < k; ++a) ga.row(a) = grads.row(active[a]), t = std::max(t, vals[active[a]]);
    Matrix lsq(dim + 1, k);
    lsq.topRows(dim) = ga.transpose();
    lsq.row(dim).setOnes();
    Vector e = Vector::Zero(dim + 1);
    e[dim] = 1.0;
    Vector lambda = lsq.colPivHouseholderQr().solve(e);
    const double h_fd = 1e-5;
    for (int it = 0; it < 30; ++it) {
        const Matrix basis = householder_tangent_basis(x);
        if (!chart_terms(exact, x, basis, Vector::Zero(dim), vals, grads)) return;
        Vector va(k);
        for (Eigen::Index a = 0; a < k; ++a) ga.row(a) = grads.row(active[a]), va[a] = vals[active[a]];
        Matrix w(dim, dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
            Vector up = Vector::Zero(dim), vp, vm;
            Matrix gp, gm;
            up[j] = h_fd;
            if (!chart_terms(exact, x, basis, up, vp, gp) || !chart_terms(exact, x, basis, -up, vm, gm)) return;
            Vector col = Vector::Zero(dim);
            for (Eigen::Index a = 0; a < k; ++a)
                col += lambda[a] * (gp.row(active[a]) - gm.row(active[a])).transpose() / (2 * h_fd);
            w.col(j) = col;
        }
        w = 0.5 * (w + w.transpose()).eval();
        const Eigen::Index sz = dim + 1 + k;
        Matrix kkt = Matrix::Zero(sz, sz);
        Vector rhs(sz);
        kkt.block(0, 0, k, dim) = ga;
        kkt.block(0, dim, k, 1).setConstant(-1.0);
        rhs.head(k) = -(va.array() - t).matrix();
        kkt.block(k, 0, dim, dim) = w;
        kkt.block(k, dim + 1, dim, k) = ga.transpose();
        rhs.segment(k, dim) = -(ga.transpose() * lambda);
        kkt.block(k + dim, dim + 1, 1, k).setOnes();
        rhs[k + dim] = 1.0 - lambda.sum();
        Eigen::FullPivLU<Matrix> lu(kkt);
        if (!lu.isInvertible()) return;
        const Vector step = lu.solve(rhs);
        const Vector du = step.head(dim);
        if (!(du.norm() < 1e-2)) return;
        x = retract(x + basis * du);
        t += step[dim];
        lambda += step.tail(k);
        const double h = exact.value(x);
        if (h < out.h) {
            out.h = h;
            out.x = x;
        }
        if (du.norm() < 1e-15) return;
    }
}

/// Coordinate sweeps stall where several terms of h are equal, which is where
/// its minimum usually is. Tries active-set Newton for the k largest terms,
/// for every k whose k-th term is within 1% of the maximum.
inline void refine_h(KappaObjective& exact, HSearch& out) {
    Vector vals;
    Matrix grads;
    if (!exact.terms(out.x, vals, grads)) return;
    std::vector<int> order(static_cast<std::size_t>(vals.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return vals[a] > vals[b]; });
    const HSearch start = out;
    for (std::size_t k = 1; k <= order.size(); ++k) {
        if (vals[order[k - 1]] < 0.99 * vals[order[0]]) break;
        std::vector<int> active(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(active.begin(), active.end());
        HSearch trial = start;
        active_set_newton(exact, active, trial);
        if (trial.h < out.h) out = trial;
    }
}

/// Global minimum estimate of h over the sphere for a system of unit max-Weyl
/// norm. Every start is run on the p = 16 surrogate; the best point under the
/// exact h (start points included, ties to the lowest index) is refined by
/// raising p and finally by golden sweeps on h itself. The result is never
/// worse than h at any start.
inline HSearch minimize_h(const PolySystem& unit_f, const std::vector<Vector>& starts, const OptimizerOptions& opts) {
    KappaObjective exact(unit_f);
    KappaSurrogate smooth(unit_f, 16.0);
    HSearch out;
    for (const Vector& s : starts) {
        const Vector x0 = retract(s);
        const double h0 = exact.value(x0);
        const LocalResult r = minimize_on_sphere(smooth, x0, opts);
        ++out.starts_used;
        if (r.converged) ++out.converged_starts;
        const double h1 = exact.value(r.x);
        if (h0 < out.h) {
            out.h = h0;
            out.x = x0;
            out.converged = r.converged;
        }
        if (h1 < out.h) {
            out.h = h1;
            out.x = r.x;
            out.converged = r.converged;
            out.used_fallback = r.used_fd || r.used_golden;
        }
    }
    if (out.starts_used == 0) return out;
    for (double p : {64.0, 256.0, 1024.0}) {
        KappaSurrogate sharp(unit_f, p);
        const LocalResult r = minimize_on_sphere(sharp, out.x, opts);
        const double h = exact.value(r.x);
        if (h < out.h) {
            out.h = h;
            out.x = r.x;
        }
    }
    LocalResult res;
    res.x = out.x;
    res.value = out.h;
    auto f = [&](const Vector& x) { return exact.value(x); };
    golden_sweeps(f, res, 1e-3, 1e-11, opts.max_iter);
    out.x = res.x;
    out.h = res.value;
    refine_h(exact, out);
    return out;
}

inline ConditionReport tilde_from(const PolySystem& unit_f, double l2, const Vector& x,
                                  const MultistartResult& ms) {
    ConditionReport r;
    // final value recomputed directly at the winning point
    const double g = sigma_min_profile(unit_f, SpherePoint::normalized(x));
    r.L_underline = g * l2 * l2;
    r.kappa_tilde = g > 0.0 ? 1.0 / std::sqrt(g) : std::numeric_limits<double>::infinity();
    r.argmin_x = SpherePoint::normalized(x);
    r.starts_used = ms.starts_used;
    r.converged_starts = ms.converged_starts;
    r.converged = ms.best.converged;
    r.used_fallback = ms.best.used_fd || ms.best.used_golden;
    return r;
}

inline double kappa_from_h(double h) { return h > 0.0 ? 1.0 / h : std::numeric_limits<double>::infinity(); }

}  // namespace detail

inline ConditionReport kappa_tilde(const PolySystem& f, const OptimizerOptions& opts = {}) {
    detail::require_nonzero(f, "kappa_tilde");
    const double l2 = f.norms().l2_weyl;
    const PolySystem unit_f = f.scaled(1.0 / l2);
    ProfileObjective obj(unit_f);
    const auto starts = sphere_starts(f.num_vars(), opts.effective_starts(f.n()), opts.seed, opts.stream_id);
    const auto ms = multistart_minimize(obj, starts, opts);
    return detail::tilde_from(unit_f, l2, ms.best.x, ms);
}

inline ConditionReport kappa(const PolySystem& f, const OptimizerOptions& opts = {}) {
    detail::require_nonzero(f, "kappa");
    const PolySystem unit_f = f.scaled(1.0 / f.norms().max_weyl);
    const auto starts = sphere_starts(f.num_vars(), opts.effective_starts(f.n()), opts.seed, opts.stream_id);
    const auto hs = detail::minimize_h(unit_f, starts, opts);
    ConditionReport r;
    r.argmax_x = SpherePoint::normalized(hs.x);
    r.kappa = detail::kappa_from_h(KappaObjective(unit_f).value(r.argmax_x.coords));
    r.starts_used = hs.starts_used;
    r.converged_starts = hs.converged_starts;
    r.converged = hs.converged;
    r.used_fallback = hs.used_fallback;
    return r;
}

/// Both numbers with shared information: the kappa search also starts from the
/// L-minimizer, and L is re-evaluated at the kappa maximizer. At any x,
///   |f|_W / (sqrt(n) sqrt(g(x))) <= 1/h(x) <= sqrt(2n) |f|_W / sqrt(g(x)),
/// so exchanging the two points makes the reported pair satisfy
/// kappa_tilde/sqrt(n) <= kappa <= sqrt(2n) kappa_tilde.
inline ConditionReport condition_numbers(const PolySystem& f, const OptimizerOptions& opts = {}) {
    detail::require_nonzero(f, "condition_numbers");
    const auto norms = f.norms();
    const PolySystem unit_l2 = f.scaled(1.0 / norms.l2_weyl);
    const PolySystem unit_max = f.scaled(1.0 / norms.max_weyl);
    const auto starts = sphere_starts(f.num_vars(), opts.effective_starts(f.n()), opts.seed, opts.stream_id);

    ProfileObjective prof(unit_l2);
    const auto ms_t = multistart_minimize(prof, starts, opts);

    std::vector<Vector> kstarts;
    kstarts.reserve(starts.size() + 1);
    kstarts.push_back(ms_t.best.x);
    kstarts.insert(kstarts.end(), starts.begin(), starts.end());
    const auto hs = detail::minimize_h(unit_max, kstarts, opts);

    Vector xt = ms_t.best.x;
    if (prof.value(retract(hs.x)) < prof.value(retract(xt))) xt = hs.x;

    ConditionReport r = detail::tilde_from(unit_l2, norms.l2_weyl, xt, ms_t);
    r.argmax_x = SpherePoint::normalized(hs.x);
    r.kappa = detail::kappa_from_h(KappaObjective(unit_max).value(r.argmax_x.coords));
    r.starts_used = ms_t.starts_used + hs.starts_used;
    r.converged_starts = ms_t.converged_starts + hs.converged_starts;
    r.converged = ms_t.best.converged && hs.converged;
    r.used_fallback = r.used_fallback || hs.used_fallback;
    return r;
}

}  // namespace polycond
