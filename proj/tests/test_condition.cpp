#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include <polycond/polycond.hpp>

#include "support/oracles.hpp"

using namespace polycond;

namespace {

PolySystem x0x1() {
    HomogeneousPoly p(2, 2);
    p.set_coeff(MultiIndex{{1, 1}}, 1.0);
    return PolySystem(std::vector<HomogeneousPoly>{p});
}

PolySystem x0sq() {
    HomogeneousPoly p(2, 2);
    p.set_coeff(MultiIndex{{2, 0}}, 1.0);
    return PolySystem(std::vector<HomogeneousPoly>{p});
}

const SpherePoint e0_2 = SpherePoint::basis(2, 0);

}  // namespace

TEST(RestrictedJacobian, Examples) {
    EXPECT_NEAR(restricted_jacobian(x0x1(), TangentFrame::at(e0_2))(0, 0), 1.0, 1e-15);
    EXPECT_EQ(restricted_jacobian(x0sq(), TangentFrame::at(e0_2))(0, 0), 0.0);
}

TEST(RestrictedJacobian, RankMatchesDeflatedJacobian) {
    RngStream rng(31, 0);
    for (int t = 0; t < 10; ++t) {
        const PolySystem f = sample_system({2, 3, 2}, 3, rng);
        const SpherePoint x(oracle::random_unit(4, rng));
        const TangentFrame fr = TangentFrame::at(x);
        EXPECT_LE((fr.basis.transpose() * fr.basis - Matrix::Identity(3, 3)).norm(), 1e-12);
        EXPECT_LE((fr.basis.transpose() * x.coords).norm(), 1e-12);
        const Matrix r = restricted_jacobian(f, fr);
        const Matrix p = Matrix::Identity(4, 4) - x.coords * x.coords.transpose();
        const Matrix deflated = f.jacobian(x.coords) * p;
        const Vector s1 = Eigen::JacobiSVD<Matrix>(r).singularValues();
        Vector s2 = Eigen::JacobiSVD<Matrix>(deflated).singularValues();
        EXPECT_LE((s1 - s2.head(3)).norm(), 1e-10 * s2[0]);
    }
    // a rank-one Jacobian stays rank one after restriction
    const Matrix r = restricted_jacobian(x0sq(), TangentFrame::at(SpherePoint::normalized(Vector::Ones(2))));
    EXPECT_GT(std::abs(r(0, 0)), 0.1);
}

TEST(MuNorm, Examples) {
    EXPECT_NEAR(mu_norm(x0x1(), e0_2), 1.0, 1e-14);
    EXPECT_EQ(mu_norm(x0sq(), e0_2), std::numeric_limits<double>::infinity());
}

TEST(MuNorm, ScaleInvariant) {
    RngStream rng(32, 0);
    const PolySystem f = sample_system({2, 3}, 2, rng);
    const SpherePoint x(oracle::random_unit(3, rng));
    for (double lam : {0.1, 10.0}) EXPECT_NEAR(mu_norm(f.scaled(lam), x), mu_norm(f, x), 1e-12 * mu_norm(f, x));
}

TEST(LField, Examples) {
    const StiefelPoint p(Vector::Unit(2, 0), Vector::Unit(2, 1));
    EXPECT_NEAR(L_field(x0x1(), p), 0.5, 1e-15);
    // x0^2 at (e1, e0): value and derivative along y vanish
    EXPECT_EQ(L_field(x0sq(), StiefelPoint(Vector::Unit(2, 1), Vector::Unit(2, 0))), 0.0);
    EXPECT_THROW(L_field(x0x1(), StiefelPoint(Vector::Unit(3, 0), Vector::Unit(3, 1))), std::invalid_argument);
    EXPECT_THROW(StiefelPoint(Vector::Unit(2, 0), Vector::Ones(2) / std::sqrt(2.0)), std::invalid_argument);
}

TEST(LField, OrthogonalChangeOfVariables) {
    RngStream rng(33, 0);
    for (int t = 0; t < 5; ++t) {
        const PolySystem f = sample_system({2, 3, 2}, 3, rng);
        const Matrix u = oracle::random_orthogonal(4, rng);
        const PolySystem g = oracle::compose_orthogonal(f, u, rng);
        const Vector x = oracle::random_unit(4, rng);
        Vector y = oracle::random_gaussian(4, rng);
        y = (y - x.dot(y) * x).normalized();
        const double a = L_field(f, StiefelPoint(x, y));
        const Vector ux = u * x, uy = u * y;
        const double b = L_field(g, StiefelPoint(ux / ux.norm(), uy / uy.norm()));
        EXPECT_NEAR(a, b, 1e-9 * std::max(1.0, a));
    }
}

TEST(SigmaMinProfile, Examples) {
    EXPECT_NEAR(sigma_min_profile(x0x1(), e0_2), 0.5, 1e-15);
    RngStream rng(34, 0);
    for (int t = 0; t < 10; ++t) {
        const PolySystem f = sample_system({2, 3}, 2, rng);
        EXPECT_GE(sigma_min_profile(f, SpherePoint(oracle::random_unit(3, rng))), 0.0);
    }
}

TEST(SigmaMinProfile, EqualsMinimumOverPerpendicularDirections) {
    RngStream rng(35, 0);
    for (int t = 0; t < 5; ++t) {
        const PolySystem f = sample_system({2, 2}, 2, rng);
        const Vector x = oracle::random_unit(3, rng);
        const double g = sigma_min_profile(f, SpherePoint(x));
        const double grid = oracle::min_L_over_y_grid(f, x);
        EXPECT_LE(g, grid + 1e-9 * grid);
        EXPECT_NEAR(g, grid, 1e-6 * grid);
    }
}

TEST(ProfileObjective, GradientMatchesFiniteDifferences) {
    RngStream rng(36, 0);
    int checked = 0;
    for (int t = 0; t < 20; ++t) {
        const PolySystem f = sample_system({2, 3, 2}, 3, rng);
        const Vector x = oracle::random_unit(4, rng);
        ProfileObjective obj(f);
        const auto g = obj.gradient(x);
        if (!g) continue;
        ++checked;
        auto along = [&](const Vector& z) { return sigma_min_profile(f, SpherePoint::normalized(z)); };
        const Vector fd = project_tangent(x, oracle::fd_gradient(along, x, 1e-6));
        EXPECT_LE((*g - fd).norm(), 1e-6 * std::max(1.0, fd.norm()));
        EXPECT_LE(std::abs(g->dot(x)), 1e-12 * std::max(1.0, g->norm()));
    }
    EXPECT_GT(checked, 15);
}

TEST(KappaSurrogate, GradientMatchesFiniteDifferences) {
    RngStream rng(37, 0);
    int checked = 0;
    for (int t = 0; t < 20; ++t) {
        const PolySystem f = sample_system({2, 2, 2}, 3, rng);
        const PolySystem unit = f.scaled(1.0 / f.norms().max_weyl);
        const Vector x = oracle::random_unit(4, rng);
        for (double p : {16.0, 256.0}) {
            KappaSurrogate s(unit, p);
            std::optional<Vector> g;
            s.value_and_gradient(x, g);
            if (!g) continue;
            ++checked;
            auto along = [&](const Vector& z) { return s.value(z / z.norm()); };
            const Vector fd = project_tangent(x, oracle::fd_gradient(along, x, 1e-7));
            EXPECT_LE((*g - fd).norm(), 1e-5 * std::max(1.0, fd.norm())) << "p=" << p;
        }
    }
    EXPECT_GT(checked, 30);
}

TEST(KappaSurrogate, BracketsTheExactObjective) {
    RngStream rng(38, 0);
    const PolySystem f = sample_system({2, 2, 2}, 3, rng);
    const PolySystem unit = f.scaled(1.0 / f.norms().max_weyl);
    KappaObjective h(unit);
    for (double p : {16.0, 64.0}) {
        KappaSurrogate s(unit, p);
        for (int t = 0; t < 20; ++t) {
            const Vector x = oracle::random_unit(4, rng);
            const double hx = h.value(x), sx = s.value(x);
            EXPECT_GE(sx, hx * (1 - 1e-14));
            EXPECT_LE(sx, hx * std::pow(4.0, 1.0 / p) * (1 + 1e-14));
        }
    }
}

TEST(KappaTilde, AnalyticProduct) {
    const auto r = kappa_tilde(x0x1());
    EXPECT_NEAR(r.kappa_tilde, std::numbers::sqrt2, 1e-6);
    EXPECT_NEAR(r.L_underline, 0.25, 1e-8);
    EXPECT_NEAR(oracle::circle_min_L(x0x1()), 0.25, 1e-10);
    EXPECT_EQ(r.certification, Certification::heuristic);
}

TEST(KappaTilde, MatchesCircleScanForOneVariable) {
    RngStream rng(39, 0);
    for (int d = 2; d <= 4; ++d)
        for (int t = 0; t < 3; ++t) {
            const PolySystem f = sample_system({d}, 1, rng);
            const PolySystem unit = f.scaled(1.0 / f.norms().l2_weyl);
            const double want = oracle::circle_min_L(unit);
            const auto r = kappa_tilde(f);
            const double got = r.L_underline / (f.norms().l2_weyl * f.norms().l2_weyl);
            EXPECT_NEAR(got, want, 1e-8 * std::max(1.0, want)) << "d=" << d;
        }
}

TEST(KappaTilde, AtLeastOneAndConsistent) {
    RngStream rng(40, 0);
    for (int t = 0; t < 10; ++t) {
        const PolySystem f = sample_system({2, 2, 2}, 3, rng);
        const auto r = kappa_tilde(f);
        EXPECT_GE(r.kappa_tilde, 1.0);
        EXPECT_NEAR(r.kappa_tilde, f.norms().l2_weyl / std::sqrt(r.L_underline), 1e-9 * r.kappa_tilde);
        EXPECT_EQ(r.starts_used, 8 * 16);
    }
}

TEST(KappaTilde, ScaleInvariant) {
    RngStream rng(41, 0);
    const PolySystem f = sample_system({2, 2, 2}, 3, rng);
    const double k = kappa_tilde(f).kappa_tilde;
    for (double lam : {0.1, 10.0}) EXPECT_NEAR(kappa_tilde(f.scaled(lam)).kappa_tilde, k, 1e-9 * k);
}

TEST(KappaTilde, OrthogonallyEquivariant) {
    RngStream rng(42, 0);
    for (int t = 0; t < 3; ++t) {
        const PolySystem f = sample_system({2, 2, 2}, 3, rng);
        const Matrix u = oracle::random_orthogonal(4, rng);
        const PolySystem g = oracle::compose_orthogonal(f, u, rng);
        const auto a = kappa_tilde(f), b = kappa_tilde(g);
        EXPECT_NEAR(a.kappa_tilde, b.kappa_tilde, 1e-6 * a.kappa_tilde);
        // the minimizer moves with U, up to the antipodal symmetry
        const Vector ux = u * a.argmin_x.coords;
        const double agree = std::abs(ux.dot(b.argmin_x.coords));
        const double ga = sigma_min_profile(g, SpherePoint::normalized(ux));
        EXPECT_TRUE(agree > 1 - 1e-6 || std::abs(ga - sigma_min_profile(g, b.argmin_x)) < 1e-9 * ga);
    }
}

TEST(KappaTilde, MinimizerIsStationary) {
    RngStream rng(43, 0);
    OptimizerOptions opt;
    for (int t = 0; t < 5; ++t) {
        const PolySystem f = sample_system({2, 2, 2}, 3, rng);
        const auto r = kappa_tilde(f, opt);
        ProfileObjective obj(f.scaled(1.0 / f.norms().l2_weyl));
        const auto g = obj.gradient(r.argmin_x.coords);
        if (g) EXPECT_LT(g->norm(), opt.tol);
    }
}

TEST(KappaTilde, ZeroSystemIsAnError) {
    EXPECT_THROW(kappa_tilde(PolySystem::zeros({2, 2})), std::invalid_argument);
    EXPECT_THROW(kappa(PolySystem::zeros({2, 2})), std::invalid_argument);
}

TEST(Kappa, ProductSystem) {
    const auto r = kappa(x0x1());
    EXPECT_GE(r.kappa, 1.0 - 1e-12);
    EXPECT_TRUE(std::isfinite(r.kappa));
}

TEST(Kappa, ScaleInvariant) {
    RngStream rng(44, 0);
    const PolySystem f = sample_system({2, 2, 2}, 3, rng);
    const double k = kappa(f).kappa;
    for (double lam : {0.1, 10.0}) EXPECT_NEAR(kappa(f.scaled(lam)).kappa, k, 1e-9 * k);
}

TEST(Kappa, MaximizerIsLocallyOptimal) {
    RngStream rng(47, 0);
    for (int t = 0; t < 10; ++t) {
        const PolySystem f = sample_system({2, 2, 2}, 3, rng);
        const PolySystem unit = f.scaled(1.0 / f.norms().max_weyl);
        const auto r = kappa(f);
        KappaObjective h(unit);
        const double h0 = h.value(r.argmax_x.coords);
        EXPECT_NEAR(1.0 / h0, r.kappa, 1e-12 * r.kappa);
        for (double step : {1e-3, 1e-5, 1e-7})
            for (int s = 0; s < 50; ++s) {
                const Vector d = project_tangent(r.argmax_x.coords, oracle::random_gaussian(4, rng));
                const Vector z = r.argmax_x.coords + step * d / d.norm();
                EXPECT_GE(h.value(z / z.norm()), h0 * (1 - 1e-13)) << "system " << t << " step " << step;
            }
    }
}

TEST(ConditionNumbers, ScaleInvariantOnManySystems) {
    RngStream rng(48, 0);
    for (int t = 0; t < 20; ++t) {
        const PolySystem f = sample_system({2, 2, 2}, 3, rng);
        const auto base = condition_numbers(f);
        for (double lam : {0.1, 10.0}) {
            const auto r = condition_numbers(f.scaled(lam));
            EXPECT_NEAR(r.kappa, base.kappa, 1e-9 * base.kappa) << "system " << t << " lambda " << lam;
            EXPECT_NEAR(r.kappa_tilde, base.kappa_tilde, 1e-9 * base.kappa_tilde) << "system " << t;
        }
    }
}

TEST(ConditionNumbers, SandwichHolds) {
    RngStream rng(45, 0);
    for (int t = 0; t < 20; ++t) {
        const PolySystem f = sample_system({2, 2, 2}, 3, rng);
        OptimizerOptions opt;
        opt.seed = 45;
        opt.stream_id = make_stream_id(StreamTag::optimizer_starts, static_cast<std::uint64_t>(t));
        const auto r = condition_numbers(f, opt);
        EXPECT_LE(r.kappa_tilde / std::sqrt(3.0), r.kappa * (1 + 1e-9));
        EXPECT_LE(r.kappa, std::sqrt(6.0) * r.kappa_tilde * (1 + 1e-9));
        EXPECT_GE(r.kappa_tilde, 1.0);
        EXPECT_TRUE(r.has_kappa() && r.has_kappa_tilde());
    }
}

TEST(ConditionNumbers, NeverWorseThanSeparateSearches) {
    RngStream rng(46, 0);
    for (int t = 0; t < 5; ++t) {
        const PolySystem f = sample_system({2, 3, 2}, 3, rng);
        const auto both = condition_numbers(f), kt = kappa_tilde(f), k = kappa(f);
        EXPECT_GE(both.kappa_tilde, kt.kappa_tilde * (1 - 1e-12));
        EXPECT_GE(both.kappa, k.kappa * (1 - 1e-9));
    }
}
