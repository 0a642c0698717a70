#include <gtest/gtest.h>

#include <cmath>

#include <polycond/polycond.hpp>

#include "support/oracles.hpp"

using namespace polycond;

namespace {

Matrix gaussian(int r, int c, RngStream& rng) {
    Matrix a(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) a(i, j) = rng.normal();
    return a;
}

// Cauchy-Binet right side by bitmask enumeration of column subsets.
double brute_cauchy_binet(const Matrix& a, const Matrix& b) {
    const int m = static_cast<int>(a.rows()), n = static_cast<int>(a.cols());
    double s = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != m) continue;
        Matrix as(m, m), bs(m, m);
        int c = 0;
        for (int j = 0; j < n; ++j)
            if (mask & (1u << j)) as.col(c) = a.col(j), bs.row(c) = b.row(j), ++c;
        s += as.determinant() * bs.determinant();
    }
    return s;
}

Matrix assembled_q(const Matrix& a, const Matrix& b, const Matrix& c) {
    const auto k = a.rows(), n1 = c.rows();
    Matrix q(k + n1, k + n1);
    q.topLeftCorner(k, k) = a * a.transpose() + b * b.transpose();
    q.topRightCorner(k, n1) = a * c.transpose();
    q.bottomLeftCorner(n1, k) = c * a.transpose();
    q.bottomRightCorner(n1, n1) = c * c.transpose();
    return q;
}

}  // namespace

TEST(CauchyBinet, SmallExample) {
    Matrix a(1, 2), b(2, 1);
    a << 1, 2;
    b << 3, 4;
    const auto r = cauchy_binet_check(a, b);
    EXPECT_DOUBLE_EQ(r.lhs, 11.0);
    EXPECT_DOUBLE_EQ(r.rhs, 11.0);
}

TEST(CauchyBinet, SquareReducesToProduct) {
    RngStream rng(61, 0);
    const Matrix a = gaussian(4, 4, rng), b = gaussian(4, 4, rng);
    const auto r = cauchy_binet_check(a, b);
    EXPECT_NEAR(r.rhs, a.determinant() * b.determinant(), 1e-12 * r.scale);
}

TEST(CauchyBinet, MatchesSubsetEnumeration) {
    RngStream rng(62, 0);
    for (int t = 0; t < 20; ++t) {
        const Matrix a = gaussian(3, 5, rng), b = gaussian(5, 3, rng);
        const auto r = cauchy_binet_check(a, b);
        EXPECT_NEAR(r.rhs, brute_cauchy_binet(a, b), 1e-10 * r.scale);
        EXPECT_NEAR(r.lhs, (a * b).determinant(), 1e-10 * r.scale);
        EXPECT_LT(r.rel_error(), 1e-10);
    }
}

TEST(CauchyBinet, ShapeErrors) {
    EXPECT_THROW(cauchy_binet_check(Matrix::Ones(3, 2), Matrix::Ones(2, 3)), std::invalid_argument);
    EXPECT_THROW(cauchy_binet_check(Matrix::Ones(2, 3), Matrix::Ones(2, 3)), std::invalid_argument);
}

TEST(ShiftedDet, IdentityExample) {
    const auto r = shifted_det_expansion(Matrix::Identity(2, 2), 1, 5.0);
    EXPECT_DOUBLE_EQ(r.lhs, 6.0);
    EXPECT_DOUBLE_EQ(r.rhs, 6.0);
}

TEST(ShiftedDet, FullShiftMatchesDirectDeterminant) {
    RngStream rng(63, 0);
    const Matrix c = gaussian(4, 4, rng);
    const double lam = 0.37;
    const auto r = shifted_det_expansion(c, 4, lam);
    const double direct = (c + lam * Matrix::Identity(4, 4)).determinant();
    EXPECT_NEAR(r.lhs, direct, 1e-12 * r.scale);
    EXPECT_NEAR(r.rhs, direct, 1e-10 * r.scale);
}

TEST(ShiftedDet, RandomFiveByFive) {
    RngStream rng(64, 0);
    const Matrix c = gaussian(5, 5, rng);
    Matrix shifted = c;
    for (int i = 0; i < 3; ++i) shifted(i, i) += 0.7;
    const auto r = shifted_det_expansion(c, 3, 0.7);
    EXPECT_NEAR(r.lhs, shifted.determinant(), 1e-12 * r.scale);
    EXPECT_LT(r.rel_error(), 1e-10);
}

TEST(ShiftedDet, Errors) {
    EXPECT_THROW(shifted_det_expansion(Matrix::Identity(3, 3), 0, 1.0), std::invalid_argument);
    EXPECT_THROW(shifted_det_expansion(Matrix::Identity(3, 3), 4, 1.0), std::invalid_argument);
    EXPECT_THROW(shifted_det_expansion(Matrix::Ones(2, 3), 1, 1.0), std::invalid_argument);
}

TEST(BlockDet, ZeroCouplingBlock) {
    RngStream rng(65, 0);
    const Matrix b = gaussian(2, 4, rng), c = gaussian(3, 4, rng);
    const auto r = block_det_identity(Matrix::Zero(2, 4), b, c);
    const double want = (c * c.transpose()).determinant() * (b * b.transpose()).determinant();
    EXPECT_NEAR(r.lhs, want, 1e-10 * r.scale);
    EXPECT_NEAR(r.rhs, want, 1e-10 * r.scale);
}

TEST(BlockDet, MatchesAssembledDeterminant) {
    RngStream rng(66, 0);
    for (auto [k, n] : std::vector<std::pair<int, int>>{{1, 2}, {2, 4}, {3, 5}}) {
        const Matrix a = gaussian(k, n, rng), b = gaussian(k, n, rng), c = gaussian(n - 1, n, rng);
        const auto r = block_det_identity(a, b, c);
        const double direct = assembled_q(a, b, c).determinant();
        EXPECT_NEAR(r.lhs, direct, 1e-12 * r.scale);
        EXPECT_LT(r.rel_error(), k == 1 ? 1e-12 : 1e-10) << k << "," << n;
    }
}

TEST(BlockDet, Errors) {
    EXPECT_THROW(block_det_identity(Matrix::Ones(2, 2), Matrix::Ones(2, 2), Matrix::Ones(1, 2)), std::invalid_argument);
    EXPECT_THROW(block_det_identity(Matrix::Ones(1, 3), Matrix::Ones(1, 3), Matrix::Ones(1, 3)), std::invalid_argument);
}

TEST(ExactIdentities, Rationals) {
    RngStream rng(67, 0);
    const auto r1 = cauchy_binet(to_grid<Rational>(gaussian(2, 4, rng)), to_grid<Rational>(gaussian(4, 2, rng)));
    EXPECT_EQ(r1.lhs, r1.rhs);
    const auto r2 = shifted_det(to_grid<Rational>(gaussian(4, 4, rng)), 2, Rational(3, 7));
    EXPECT_EQ(r2.lhs, r2.rhs);
    const auto r3 = block_det(to_grid<Rational>(gaussian(1, 3, rng)), to_grid<Rational>(gaussian(1, 3, rng)),
                              to_grid<Rational>(gaussian(2, 3, rng)));
    EXPECT_EQ(r3.lhs, r3.rhs);
    const auto r4 = bhat_minors_exact(gaussian(2, 3, rng), {2, 3, 5});
    EXPECT_EQ(r4.lhs, r4.rhs);
}

TEST(BhatComparison, EqualDegreesAreTight) {
    RngStream rng(68, 0);
    for (int n = 2; n <= 5; ++n) {
        const Matrix b = gaussian(n - 1, n, rng);
        const auto r = bhat_comparison(b, std::vector<int>(static_cast<std::size_t>(n), 2));
        const double want = std::ldexp(1.0, n - 1) * r.det_BBt;
        EXPECT_NEAR(r.det_BhatBhatT, want, 1e-10 * std::abs(want));
        EXPECT_NEAR(r.lower, want, 1e-10 * std::abs(want));
        EXPECT_NEAR(r.upper, want, 1e-10 * std::abs(want));
        EXPECT_TRUE(r.sandwich_holds());
    }
}

TEST(BhatComparison, MixedDegrees) {
    RngStream rng(69, 0);
    for (int t = 0; t < 50; ++t) {
        const auto r = bhat_comparison(gaussian(2, 3, rng), {2, 3, 4});
        EXPECT_TRUE(r.sandwich_holds());
        EXPECT_LT(r.two_way_rel_error(), 1e-10);
        EXPECT_GT(r.det_BhatBhatT, 0.0);
    }
}

TEST(BhatComparison, RowsRemoved) {
    RngStream rng(70, 0);
    const Matrix b = gaussian(4, 5, rng);
    for (const auto& removed : {IndexSubset{{0}, 4}, IndexSubset{{1, 3}, 4}, IndexSubset{{0, 1, 2}, 4}}) {
        const auto r = bhat_comparison(b, {2, 3, 4, 2, 3}, removed);
        EXPECT_TRUE(r.sandwich_holds());
        EXPECT_LT(r.two_way_rel_error(), 1e-10);
    }
}

TEST(BhatComparison, RankDeficient) {
    Matrix b(2, 3);
    b << 1, 2, 3, 2, 4, 6;
    const auto r = bhat_comparison(b, {2, 3, 4});
    EXPECT_NEAR(r.det_BBt, 0.0, 1e-12);
    EXPECT_NEAR(r.det_BhatBhatT, 0.0, 1e-12);
    EXPECT_NEAR(r.det_BhatBhatT_by_minors, 0.0, 1e-12);
    EXPECT_NEAR(r.lower, 0.0, 1e-12);
    EXPECT_NEAR(r.upper, 0.0, 1e-12);
}

TEST(BhatComparison, Errors) {
    EXPECT_THROW(bhat_comparison(Matrix::Ones(2, 2), {2, 2}), std::invalid_argument);
    EXPECT_THROW(bhat_comparison(Matrix::Ones(1, 2), {2}), std::invalid_argument);
    EXPECT_THROW(bhat_comparison(Matrix::Ones(1, 2), {1, 2}), std::invalid_argument);
}

TEST(Wishart, ExactValues) {
    EXPECT_EQ(wishart_det_exact(1, 1), 1.0);
    EXPECT_EQ(wishart_det_exact(2, 3), 6.0);
    EXPECT_EQ(wishart_det_exact(2, 4), 12.0);
    EXPECT_EQ(wishart_det_exact(0, 4), 1.0);
    EXPECT_THROW(wishart_det_exact(3, 2), std::invalid_argument);
}

TEST(Wishart, MonteCarloWithinThreeStandardErrors) {
    const auto w = wishart_expected_det(2, 4, 100000, RngStream(71, 0));
    EXPECT_EQ(w.exact, 12.0);
    EXPECT_LT(std::abs(w.empirical.mean - w.exact), 3 * w.empirical.se);
}

TEST(LambdaBar, Examples) {
    EXPECT_EQ(lambda_bar(Matrix(-Matrix::Identity(3, 3))), 0.0);
    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 3, d(1, 1) = 1;
    EXPECT_NEAR(lambda_bar(d), 3.0, 1e-14);
    EXPECT_THROW(lambda_bar(Matrix::Ones(2, 3)), std::invalid_argument);
}

TEST(LambdaBar, SampledEntryVariances) {
    RngStream rng(72, 0);
    const int n = 4, draws = 40000;
    RunningStats diag, off;
    for (int t = 0; t < draws; ++t) {
        const auto g = sample_goe_like(n, rng);
        EXPECT_EQ(g.entries, g.entries.transpose());
        diag.add(g.entries(1, 1) * g.entries(1, 1));
        off.add(g.entries(0, 2) * g.entries(0, 2));
    }
    EXPECT_NEAR(diag.summary().mean, 2.0 / n, 4 * diag.summary().se);
    EXPECT_NEAR(off.summary().mean, 1.0 / n, 4 * off.summary().se);
}

TEST(LambdaBar, TailBound) {
    EXPECT_DOUBLE_EQ(lambda_bar_tail_bound(5, 0.0), 1.0);
    EXPECT_NEAR(lambda_bar_tail_bound(5, 1.0), 8.21e-2, 1e-4);
    EXPECT_LT(lambda_bar_tail_bound(6, 1.0), lambda_bar_tail_bound(5, 1.0));
    EXPECT_LT(lambda_bar_tail_bound(5, 1.2), lambda_bar_tail_bound(5, 1.0));
    EXPECT_THROW(lambda_bar_tail_bound(5, -1.0), std::invalid_argument);
    EXPECT_THROW(lambda_bar_tail_bound(0, 1.0), std::invalid_argument);
}
