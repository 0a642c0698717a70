#pragma once

// Verification suites behind `polycond verify`: each check compares a closed
// form against an independent computation (Monte Carlo, finite differences,
// exact arithmetic) and records the worst discrepancy seen.
//
//   covariance  jet covariances at e_0, E f(x)f(y), orthogonal invariance,
//               chi-square law and large deviations of the Weyl norm, Legendre pair
//   matrix      Cauchy-Binet, shifted determinant, block determinant, Bhat
//               sandwich, exact rational spot checks, Wishart determinants
//   geometry    chart derivatives, push-forward metric, Hessian in the chart
//   rmt         moments and tail of lambda_bar, entry variances

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <stdexcept>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "condition.hpp"
#include "matrix_toolkit.hpp"
#include "random_model.hpp"
#include "stats.hpp"
#include "stiefel.hpp"

namespace polycond {

struct CheckResult {
    std::string suite;
    std::string name;
    bool passed = false;
    double value = 0.0;  ///< the measured discrepancy or statistic
    double limit = 0.0;  ///< pass iff value <= limit (unless noted in detail)
    std::string detail;
};

using CheckList = std::vector<CheckResult>;

inline bool all_passed(const CheckList& cs) {
    return std::all_of(cs.begin(), cs.end(), [](const CheckResult& c) { return c.passed; });
}

namespace verify {

inline CheckResult check(std::string suite, std::string name, double value, double limit, std::string detail = {}) {
    return {std::move(suite), std::move(name), value <= limit, value, limit, std::move(detail)};
}

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

inline int uniform_int(RngStream& rng, int lo, int hi) {
    return lo + static_cast<int>(rng.uniform() * (hi - lo + 1));
}

inline Vector random_unit(int dim, RngStream& rng) {
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v[k] = rng.normal();
    return v / v.norm();
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of R's diagonal folded into Q.
inline Matrix random_orthogonal(int dim, RngStream& rng) {
    const Matrix g = gaussian_matrix(dim, dim, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR();
    for (int j = 0; j < dim; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

// ------------------------------------------------------------ covariance

/// Every pairwise jet covariance at e_0 for n = 2, d in {2, 3, 4}, within 4 SE.
inline CheckList jet_covariance_checks(std::int64_t draws, std::uint64_t seed) {
    CheckList out;
    const int n = 2;
    for (int d : {2, 3, 4}) {
        const CovarianceSpec spec = jet_covariance(d, n);
        const auto m = static_cast<Eigen::Index>(spec.entries.size());
        std::vector<RunningStats> st(static_cast<std::size_t>(m * m));
        RngStream rng(seed, make_stream_id(StreamTag::verification, 100 + static_cast<std::uint64_t>(d)));
        for (std::int64_t t = 0; t < draws; ++t) {
            const HomogeneousPoly p = sample_poly(n + 1, d, rng);
            const Vector j = jet_at_e0(p, spec.entries);
            for (Eigen::Index a = 0; a < m; ++a)
                for (Eigen::Index b = a; b < m; ++b) st[static_cast<std::size_t>(a * m + b)].add(j[a] * j[b]);
        }
        double worst_z = 0.0;
        for (Eigen::Index a = 0; a < m; ++a)
            for (Eigen::Index b = a; b < m; ++b) {
                const auto& s = st[static_cast<std::size_t>(a * m + b)];
                const double diff = std::abs(s.mean() - spec.cov(a, b));
                // a product that is identically zero has no sampling error
                const double z = s.se() > 0.0 ? diff / s.se() : (diff <= 1e-12 ? 0.0 : 1e300);
                worst_z = std::max(worst_z, z);
            }
        out.push_back(check("covariance", "jet covariance d=" + std::to_string(d) + " (max |z|)", worst_z, 4.0,
                            std::to_string(m * (m + 1) / 2) + " entries, " + std::to_string(draws) + " draws"));
        const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(spec.cov, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
        out.push_back(check("covariance", "jet covariance d=" + std::to_string(d) + " is PSD (-min eig)", -min_eig, 1e-9));
    }
    return out;
}

/// E f(x) f(y) = <x, y>^d and E f(e_0)^2 = 1.
inline CheckList two_point_checks(std::int64_t draws, std::uint64_t seed) {
    CheckList out;
    RngStream pts(seed, make_stream_id(StreamTag::verification, 200));
    for (int d : {2, 3, 4}) {
        const int n = 3;
        const Vector x = random_unit(n + 1, pts), y = random_unit(n + 1, pts);
        Vector e0 = Vector::Zero(n + 1);
        e0[0] = 1.0;
        RngStream rng(seed, make_stream_id(StreamTag::verification, 210 + static_cast<std::uint64_t>(d)));
        RunningStats xy, ee;
        for (std::int64_t t = 0; t < draws; ++t) {
            const HomogeneousPoly p = sample_poly(n + 1, d, rng);
            xy.add(p.eval(x) * p.eval(y));
            const double v = p.eval(e0);
            ee.add(v * v);
        }
        const double target = std::pow(x.dot(y), d);
        out.push_back(check("covariance", "E f(x)f(y) = <x,y>^d, d=" + std::to_string(d) + " (|z|)",
                            std::abs(xy.mean() - target) / xy.se(), 4.0,
                            "mean " + fmt(xy.mean()) + " vs " + fmt(target)));
        out.push_back(check("covariance", "E f(e0)^2 = 1, d=" + std::to_string(d) + " (|z|)",
                            std::abs(ee.mean() - 1.0) / ee.se(), 4.0));
    }
    return out;
}

/// Law of f(Ux) equals law of f(x): two-sample KS on independent draws.
inline CheckList invariance_checks(std::int64_t draws, std::uint64_t seed) {
    RngStream pts(seed, make_stream_id(StreamTag::verification, 300));
    const int dim = 4, d = 3;
    const Matrix u = random_orthogonal(dim, pts);
    const Vector x = random_unit(dim, pts);
    const Vector ux = u * x;
    RngStream ra(seed, make_stream_id(StreamTag::verification, 301));
    RngStream rb(seed, make_stream_id(StreamTag::verification, 302));
    std::vector<double> a, b;
    for (std::int64_t t = 0; t < draws; ++t) {
        a.push_back(sample_poly(dim, d, ra).eval(x));
        b.push_back(sample_poly(dim, d, rb).eval(ux));
    }
    const auto ks = ks_two_sample(a, b);
    CheckResult c{"covariance", "orthogonal invariance of f(x) (KS p-value >= 0.01)", ks.p_value >= 0.01, ks.p_value, 0.01,
                  "D = " + fmt(ks.statistic)};
    return {c};
}

/// ||f||_W^2 is chi-square with N degrees of freedom; large-deviation bound.
inline CheckList largedev_checks(std::int64_t samples, std::uint64_t seed) {
    CheckList out;
    const int n = 3;
    const std::vector<int> degrees{2, 2, 2};
    const double N = static_cast<double>(model_constants(degrees, n).dim);
    RngStream rng(seed, make_stream_id(StreamTag::verification, 400));
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(samples));
    RunningStats st;
    for (std::int64_t t = 0; t < samples; ++t) {
        const double l2 = sample_system(degrees, n, rng).norms().l2_weyl;
        w.push_back(l2 * l2);
        st.add(l2 * l2);
    }
    out.push_back(check("covariance", "chi-square mean = N (|z|)", std::abs(st.mean() - N) / st.se(), 3.0,
                        "mean " + fmt(st.mean()) + ", N = " + fmt(N)));
    out.push_back(check("covariance", "chi-square variance = 2N (|z|)", std::abs(st.variance() - 2 * N) / variance_se(w),
                        5.0, "variance " + fmt(st.variance())));
    for (double eta : {0.5, 1.0, 2.0}) {
        std::int64_t hits = 0;
        for (double v : w)
            if (v >= (1.0 + eta) * N) ++hits;
        const double p = static_cast<double>(hits) / static_cast<double>(samples);
        const double bound = weyl_sq_tail_bound(eta, N);
        out.push_back(check("covariance", "P(|f|^2 >= (1+eta)N) <= bound, eta=" + fmt(eta), p, bound,
                            "empirical " + fmt(p) + ", bound " + fmt(bound)));
    }
    return out;
}

/// sup over a lambda grid of (lambda x - logmgf(lambda)) against the closed form.
inline CheckList legendre_checks() {
    double worst = 0.0;
    for (int k = 0; k <= 49; ++k) {
        const double x = 0.1 + k * 0.1;
        double best = -1e300;
        const int steps = 50000;
        for (int s = 0; s < steps; ++s) {
            const double lam = -2.0 + 2.5 * s / steps;  // [-2, 0.5)
            best = std::max(best, lam * x - logmgf_chi2_centered(lam));
        }
        worst = std::max(worst, std::abs(best - fenchel_transform(x)));
    }
    return {check("covariance", "Legendre transform of the chi-square log-mgf", worst, 1e-6, "x in [0.1, 5]")};
}

inline CheckList covariance_suite(std::int64_t trials, std::uint64_t seed) {
    CheckList out = jet_covariance_checks(trials, seed);
    for (auto&& part : {two_point_checks(trials, seed), invariance_checks(std::min<std::int64_t>(trials, 20000), seed),
                        largedev_checks(trials, seed), legendre_checks()})
        out.insert(out.end(), part.begin(), part.end());
    return out;
}

// ------------------------------------------------------------ matrix

/// The four determinant identities on random instances of size at most 7.
inline CheckList identity_checks(std::int64_t trials, std::uint64_t seed) {
    RngStream rng(seed, make_stream_id(StreamTag::matrix, 1));
    double cb = 0, sh = 0, bl = 0, two_way = 0;
    std::int64_t sandwich_fail = 0;
    for (std::int64_t t = 0; t < trials; ++t) {
        {
            const int m = uniform_int(rng, 1, 6), n = uniform_int(rng, m, 7);
            cb = std::max(cb, cauchy_binet_check(gaussian_matrix(m, n, rng), gaussian_matrix(n, m, rng)).rel_error());
        }
        {
            const int m = uniform_int(rng, 1, 7), q = uniform_int(rng, 1, m);
            sh = std::max(sh, shifted_det_expansion(gaussian_matrix(m, m, rng), q, rng.normal()).rel_error());
        }
        {
            const int n = uniform_int(rng, 2, 7), k = uniform_int(rng, 1, n - 1);
            bl = std::max(bl, block_det_identity(gaussian_matrix(k, n, rng), gaussian_matrix(k, n, rng),
                                                 gaussian_matrix(n - 1, n, rng))
                                  .rel_error());
        }
        {
            const int n = uniform_int(rng, 2, 7);
            std::vector<int> deg(static_cast<std::size_t>(n));
            for (int& d : deg) d = uniform_int(rng, 2, 6);
            const Matrix b = gaussian_matrix(n - 1, n, rng);
            const auto full = bhat_comparison(b, deg);
            two_way = std::max(two_way, full.two_way_rel_error());
            if (!full.sandwich_holds()) ++sandwich_fail;
            // the same bounds after deleting a random set of rows
            IndexSubset removed{{}, n - 1};
            for (int r = 0; r < n - 1; ++r)
                if (rng.uniform() < 0.3) removed.members.push_back(r);
            if (!bhat_comparison(b, deg, removed).sandwich_holds()) ++sandwich_fail;
        }
    }
    const std::string what = std::to_string(trials) + " random instances";
    return {check("matrix", "Cauchy-Binet (max rel error)", cb, 1e-10, what),
            check("matrix", "shifted determinant expansion (max rel error)", sh, 1e-10, what),
            check("matrix", "block determinant identity (max rel error)", bl, 1e-10, what),
            check("matrix", "Bhat Gram determinant two ways (max rel error)", two_way, 1e-10, what),
            check("matrix", "Bhat sandwich violations", static_cast<double>(sandwich_fail), 0.0, what)};
}

/// Each identity in exact rational arithmetic on a few instances.
inline CheckList exact_checks(std::uint64_t seed, int instances = 3) {
    RngStream rng(seed, make_stream_id(StreamTag::matrix, 2));
    int failures = 0;
    for (int t = 0; t < instances; ++t) {
        const Matrix a = gaussian_matrix(3, 5, rng), b = gaussian_matrix(5, 3, rng);
        const auto r1 = cauchy_binet(to_grid<Rational>(a), to_grid<Rational>(b));
        if (r1.lhs != r1.rhs) ++failures;
        const auto r2 = shifted_det(to_grid<Rational>(gaussian_matrix(5, 5, rng)), 3, Rational(rng.normal()));
        if (r2.lhs != r2.rhs) ++failures;
        const auto r3 = block_det(to_grid<Rational>(gaussian_matrix(2, 4, rng)), to_grid<Rational>(gaussian_matrix(2, 4, rng)),
                                  to_grid<Rational>(gaussian_matrix(3, 4, rng)));
        if (r3.lhs != r3.rhs) ++failures;
        const auto r4 = bhat_minors_exact(gaussian_matrix(3, 4, rng), {2, 3, 4, 5});
        if (r4.lhs != r4.rhs) ++failures;
    }
    return {check("matrix", "identities in exact rationals (failures)", failures, 0.0,
                  std::to_string(instances) + " instances of each identity")};
}

/// E det(UU^t) = n!/(n-m)! within 3 SE.
inline CheckList wishart_checks(std::int64_t trials, std::uint64_t seed) {
    CheckList out;
    std::uint64_t s = 10;
    for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 1}, {2, 3}, {2, 4}, {3, 5}}) {
        const auto w = wishart_expected_det(m, n, trials, RngStream(seed, make_stream_id(StreamTag::matrix, s++)));
        out.push_back(check("matrix", "Wishart E det(UU^t), m=" + std::to_string(m) + " n=" + std::to_string(n) + " (|z|)",
                            std::abs(w.empirical.mean - w.exact) / w.empirical.se, 3.0,
                            "empirical " + fmt(w.empirical.mean) + " vs " + fmt(w.exact)));
    }
    return out;
}

inline CheckList matrix_suite(std::int64_t trials, std::uint64_t seed) {
    CheckList out = identity_checks(trials, seed);
    for (auto&& part : {exact_checks(seed), wishart_checks(std::max<std::int64_t>(trials * 100, 1000), seed)})
        out.insert(out.end(), part.begin(), part.end());
    return out;
}

// ------------------------------------------------------------ geometry

/// Central differences of chart_psi at 0 along coordinates a (and b).
inline Vector chart_fd_first(int n, int a, double h) {
    const int dim = 2 * n - 1;
    Vector up = Vector::Zero(dim), dn = Vector::Zero(dim);
    up[a] = h;
    dn[a] = -h;
    const auto p = chart_psi(ChartCoords::from_flat(up)), m = chart_psi(ChartCoords::from_flat(dn));
    Vector out(2 * (n + 1));
    out << (p.x - m.x) / (2 * h), (p.y - m.y) / (2 * h);
    return out;
}

inline Vector chart_fd_second(int n, int a, int b, double h) {
    const int dim = 2 * n - 1;
    auto at = [&](double sa, double sb) {
        Vector u = Vector::Zero(dim);
        u[a] += sa * h;
        u[b] += sb * h;
        const auto p = chart_psi(ChartCoords::from_flat(u));
        Vector v(2 * (n + 1));
        v << p.x, p.y;
        return v;
    };
    if (a == b) return (at(1, 0) - 2 * at(0, 0) + at(-1, 0)) / (h * h);
    return (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h * h);
}

inline CheckList chart_checks(std::uint64_t seed) {
    double first = 0, second = 0, metric = 0, on_v = 0;
    bool at_zero = true;
    for (int n = 1; n <= 5; ++n) {
        const auto d1 = chart_first_derivs(n);
        const auto d2 = chart_second_derivs(n);
        const int dim = 2 * n - 1;
        Matrix jac(2 * (n + 1), dim);
        for (int a = 0; a < dim; ++a) {
            jac.col(a) = d1[static_cast<std::size_t>(a)];
            first = std::max(first, (chart_fd_first(n, a, 1e-5) - d1[static_cast<std::size_t>(a)]).cwiseAbs().maxCoeff());
            for (int b = 0; b < dim; ++b)
                second = std::max(second, (chart_fd_second(n, a, b, 1e-4) -
                                           d2[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)])
                                              .cwiseAbs()
                                              .maxCoeff());
        }
        metric = std::max(metric, (jac.transpose() * jac - Matrix::Identity(dim, dim)).cwiseAbs().maxCoeff());
        const auto p0 = chart_psi(ChartCoords::zero(n));
        at_zero = at_zero && p0.x.isApprox(Vector::Unit(n + 1, 0), 1e-15) && p0.y.isApprox(Vector::Unit(n + 1, 1), 1e-15);
        RngStream rng(seed, make_stream_id(StreamTag::verification, 500 + static_cast<std::uint64_t>(n)));
        for (int t = 0; t < 200; ++t) {
            Vector u(dim);
            for (int k = 0; k < dim; ++k) u[k] = rng.normal();
            u *= 0.3 * rng.uniform() / u.norm();
            const auto p = chart_psi(ChartCoords::from_flat(u));
            on_v = std::max({on_v, std::abs(p.x.norm() - 1), std::abs(p.y.norm() - 1), std::abs(p.x.dot(p.y))});
        }
    }
    return {check("geometry", "chart first derivatives vs finite differences (max abs)", first, 1e-8, "n = 1..5, h = 1e-5"),
            check("geometry", "chart second derivatives vs finite differences (max abs)", second, 1e-6, "n = 1..5, h = 1e-4"),
            check("geometry", "push-forward metric at 0 is the identity (max abs)", metric, 1e-10),
            check("geometry", "chart maps 0 to (e0, e1)", at_zero ? 0.0 : 1.0, 0.0),
            check("geometry", "chart images are orthonormal pairs (max abs)", on_v, 1e-12, "radius 0.3")};
}

/// Finite-difference Hessian of L o psi at 0 with step h.
inline Matrix chart_fd_hessian(const PolySystem& f, double h) {
    const int n = f.n(), dim = 2 * n - 1;
    auto L = [&](const Vector& u) { return L_in_chart(f, ChartCoords::from_flat(u)); };
    Matrix out(dim, dim);
    const Vector z = Vector::Zero(dim);
    const double l0 = L(z);
    for (int a = 0; a < dim; ++a)
        for (int b = a; b < dim; ++b) {
            Vector e = z;
            if (a == b) {
                e[a] = h;
                out(a, a) = (L(e) - 2 * l0 + L(-e)) / (h * h);
            } else {
                Vector pp = z, pm = z, mp = z, mm = z;
                pp[a] = h, pp[b] = h;
                pm[a] = h, pm[b] = -h;
                mp[a] = -h, mp[b] = h;
                mm[a] = -h, mm[b] = -h;
                out(a, b) = out(b, a) = (L(pp) - L(pm) - L(mp) + L(mm)) / (4 * h * h);
            }
        }
    return out;
}

/// Picks the step from {1e-3, 1e-4, 1e-5} where successive estimates agree best.
inline Matrix chart_fd_hessian_plateau(const PolySystem& f) {
    const std::vector<double> hs{1e-3, 1e-4, 1e-5};
    std::vector<Matrix> est;
    for (double h : hs) est.push_back(chart_fd_hessian(f, h));
    const double d01 = (est[0] - est[1]).norm(), d12 = (est[1] - est[2]).norm();
    return d01 <= d12 ? est[1] : est[2];
}

inline std::pair<int, int> inertia(const Matrix& m, double tol) {
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
    int pos = 0, neg = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] > tol) ++pos;
        if (ev[i] < -tol) ++neg;
    }
    return {pos, neg};
}

inline CheckList hessian_checks(int systems, std::uint64_t seed) {
    double worst = 0, worst_tt = 0, worst_st = 0;
    int inertia_mismatch = 0;
    RngStream rng(seed, make_stream_id(StreamTag::verification, 600));
    const int n = 3;
    const std::vector<int> degrees{2, 2, 2};
    for (int s = 0; s < systems; ++s) {
        const PolySystem f = sample_system(degrees, n, rng);
        const Matrix exact = hessian_in_chart(f).assembled();
        const Matrix fd = chart_fd_hessian_plateau(f);
        worst = std::max(worst, (exact - fd).norm() / exact.norm());
        const double tol = 1e-3 * exact.norm();
        if (inertia(exact, tol) != inertia(fd, tol)) ++inertia_mismatch;

        // Systems with d_1 f_i(e_0) = 0: the tau and sigma-tau blocks reduce to
        // Gram products of the first derivatives.
        std::vector<HomogeneousPoly> polys;
        for (int i = 0; i < n; ++i) {
            HomogeneousPoly p = f[static_cast<std::size_t>(i)];
            MultiIndex e{std::vector<int>(static_cast<std::size_t>(n + 1), 0)};
            e.exponents[0] = p.degree() - 1;
            e.exponents[1] = 1;
            p.set_coeff(e, 0.0);
            polys.push_back(std::move(p));
        }
        const PolySystem g(std::move(polys));
        const auto blocks = hessian_in_chart(g);
        Vector e0 = Vector::Unit(n + 1, 0);
        const Matrix jac = g.jacobian(e0);
        Matrix bhat(n - 1, n), v(n - 1, n);
        for (int j = 2; j <= n; ++j)
            for (int i = 0; i < n; ++i) {
                const double di = g[static_cast<std::size_t>(i)].degree();
                bhat(j - 2, i) = 2.0 / std::sqrt(di) * jac(i, j);
                v(j - 2, i) = std::sqrt(2.0 / di) * g[static_cast<std::size_t>(i)].hessian(e0)(1, j);
            }
        const Matrix tt = 0.5 * bhat * bhat.transpose();
        const Matrix st = v * bhat.transpose() / std::sqrt(2.0);
        worst_tt = std::max(worst_tt, (blocks.M_tt - tt).norm() / std::max(tt.norm(), 1e-300));
        worst_st = std::max(worst_st, (blocks.M_st - st).norm() / std::max(st.norm(), 1e-300));
    }
    const std::string what = std::to_string(systems) + " random systems, n=3, d=(2,2,2)";
    return {check("geometry", "Hessian in chart vs finite differences (max rel)", worst, 1e-4, what),
            check("geometry", "Hessian inertia matches finite differences (mismatches)", inertia_mismatch, 0.0, what),
            check("geometry", "tau block = Bhat Bhat^t / 2 when d_1 f(e0) = 0 (max rel)", worst_tt, 1e-12, what),
            check("geometry", "sigma-tau block = V Bhat^t / sqrt 2 when d_1 f(e0) = 0 (max rel)", worst_st, 1e-12, what)};
}

inline CheckList volume_checks() {
    const double v1 = stiefel_volume(1);
    const double want = std::numbers::sqrt2 * 2.0 * 2.0 * std::numbers::pi;
    return {check("geometry", "volume of V for n=1 (abs error)", std::abs(v1 - want), 1e-12, fmt(v1)),
            check("geometry", "area of S^2 = 4 pi (abs error)", std::abs(sphere_area(2) - 4 * std::numbers::pi), 1e-12)};
}

inline CheckList geometry_suite(std::int64_t trials, std::uint64_t seed) {
    CheckList out = chart_checks(seed);
    for (auto&& part : {hessian_checks(static_cast<int>(trials), seed), volume_checks()})
        out.insert(out.end(), part.begin(), part.end());
    return out;
}

// ------------------------------------------------------------ rmt

inline CheckList lambda_bar_checks(std::int64_t samples, std::uint64_t seed) {
    CheckList out;
    const int n = 5;
    RngStream rng(seed, make_stream_id(StreamTag::matrix, 50));
    std::vector<RunningStats> moments(3);
    RunningStats diag_var, off_var;
    std::vector<double> thresholds{0.5, 1.0, 1.5};
    std::vector<std::int64_t> tail_hits(thresholds.size(), 0);
    for (std::int64_t t = 0; t < samples; ++t) {
        const auto g = sample_goe_like(n, rng);
        const double lb = lambda_bar(g);
        for (int l = 1; l <= 3; ++l) moments[static_cast<std::size_t>(l - 1)].add(std::pow(lb, l));
        for (std::size_t k = 0; k < thresholds.size(); ++k)
            if (lb >= 2.0 + std::numbers::sqrt2 * thresholds[k]) ++tail_hits[k];
        diag_var.add(g.entries(0, 0) * g.entries(0, 0));
        off_var.add(g.entries(0, 1) * g.entries(0, 1));
    }
    for (int l = 1; l <= 3; ++l) {
        const auto& m = moments[static_cast<std::size_t>(l - 1)];
        out.push_back(check("rmt", "E lambda_bar^" + std::to_string(l) + " + 3 SE <= 2 4^" + std::to_string(l),
                            m.mean() + 3 * m.se(), 2.0 * std::pow(4.0, l), "mean " + fmt(m.mean())));
    }
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
        const double p = static_cast<double>(tail_hits[k]) / static_cast<double>(samples);
        const double bound = lambda_bar_tail_bound(n, thresholds[k]);
        out.push_back(check("rmt", "P(lambda_bar >= 2 + sqrt2 t) <= exp(-n t^2/2), t=" + fmt(thresholds[k]), p, bound,
                            "empirical " + fmt(p) + ", bound " + fmt(bound)));
    }
    out.push_back(check("rmt", "diagonal variance 2/n (|z|)", std::abs(diag_var.mean() - 2.0 / n) / diag_var.se(), 3.0));
    out.push_back(check("rmt", "off-diagonal variance 1/n (|z|)", std::abs(off_var.mean() - 1.0 / n) / off_var.se(), 3.0));
    return out;
}

inline CheckList rmt_suite(std::int64_t trials, std::uint64_t seed) { return lambda_bar_checks(trials, seed); }

}  // namespace verify

inline const std::vector<std::string>& verify_suite_names() {
    static const std::vector<std::string> names{"covariance", "matrix", "geometry", "rmt", "all"};
    return names;
}

/// Default trial counts per suite when --trials is not given.
inline std::int64_t default_trials(const std::string& suite) {
    if (suite == "matrix") return 1000;
    if (suite == "geometry") return 100;
    return 100000;
}

/// trials <= 0 picks each suite's default.
inline CheckList run_verify_suite(const std::string& suite, std::int64_t trials, std::uint64_t seed) {
    auto pick = [&](const std::string& s) { return trials > 0 ? trials : default_trials(s); };
    if (suite == "covariance") return verify::covariance_suite(pick(suite), seed);
    if (suite == "matrix") return verify::matrix_suite(pick(suite), seed);
    if (suite == "geometry") return verify::geometry_suite(pick(suite), seed);
    if (suite == "rmt") return verify::rmt_suite(pick(suite), seed);
    if (suite == "all") {
        CheckList out;
        for (const char* s : {"covariance", "matrix", "geometry", "rmt"}) {
            auto part = run_verify_suite(s, trials, seed);
            out.insert(out.end(), part.begin(), part.end());
        }
        return out;
    }
    throw std::invalid_argument("unknown suite '" + suite + "'");
}

inline void print_checks(std::ostream& os, const CheckList& cs) {
    for (const auto& c : cs) {
        os << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(11) << c.suite << std::setw(66) << c.name
           << " value=" << verify::fmt(c.value) << " limit=" << verify::fmt(c.limit);
        if (!c.detail.empty()) os << "  [" << c.detail << "]";
        os << '\n';
    }
}

inline nlohmann::json to_json(const CheckList& cs) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& c : cs) {
        nlohmann::json v = std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(verify::fmt(c.value));
        a.push_back({{"suite", c.suite}, {"name", c.name}, {"passed", c.passed}, {"value", v}, {"limit", c.limit},
                     {"detail", c.detail}});
    }
    return {{"passed", all_passed(cs)}, {"checks", a}};
}

}  // namespace polycond
