#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <nlohmann/json.hpp>

#include <polycond/polycond.hpp>

using namespace polycond;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const std::string& kind) {
    ExperimentConfig c;
    c.experiment = kind;
    c.n = 2;
    c.degrees = {2, 2};
    c.replicates = 24;
    c.seed = 11;
    c.optimizer.starts = 12;
    c.jobs = 1;
    return c;
}

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("polycond_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(Constants, QuadraticThreeVariables) {
    const auto c = constants_K_a(3, {2, 2, 2});
    const double want_k = 8 * 4 * std::sqrt(8.0) * std::sqrt(30.0) * std::pow(3.0, 2.5) + 1;
    EXPECT_NEAR(c.K, want_k, 1e-9 * want_k);
    EXPECT_NEAR(c.K, 7.729e3, 1.0);
    EXPECT_NEAR(c.a_threshold, 4 * 4 * 27 * std::sqrt(30.0), 1e-9);
    EXPECT_NEAR(c.a_threshold, 2.366e3, 1.0);
    EXPECT_GT(c.K, c.a_threshold);
    EXPECT_NEAR(c.expectation_bound(), 12.28, 0.01);
    EXPECT_NEAR(c.kappa_expectation_bound() - c.expectation_bound(), 0.5 * std::log(6.0), 1e-12);
    EXPECT_NEAR(c.density_coef, 1.411e3, 1.0);
    EXPECT_NEAR(c.alpha_cap, 1.0 / (4 * 4 * 243.0), 1e-15);
    EXPECT_NEAR(c.alpha_cap, 2.572e-4, 1e-7);
    EXPECT_NEAR(c.kappa_threshold, 4 * std::sqrt(2.0) * 4 * std::pow(3.0, 3.5) * std::sqrt(30.0), 1e-9);
    EXPECT_NEAR(c.kappa_prefactor, std::sqrt(6.0), 1e-15);
}

TEST(Constants, BoundsDecreaseInThreshold) {
    const auto c = constants_K_a(3, {2, 3, 2});
    for (double a = 3e3; a < 1e7; a *= 3) {
        EXPECT_LT(c.tail_bound(3 * a), c.tail_bound(a));
        EXPECT_LT(c.kappa_tail_bound(3 * a), c.kappa_tail_bound(a));
    }
    EXPECT_GT(c.density_bound(1e-5), c.density_bound(1e-6));
}

TEST(TailEstimates, Flags) {
    std::vector<double> v;
    for (int k = 1; k <= 1000; ++k) v.push_back(1000.0 / k);
    v.push_back(std::numeric_limits<double>::quiet_NaN());
    const auto c = constants_K_a(3, {2, 2, 2});
    const auto ts = tail_estimates(v, {10, 1e4}, [&](double a) { return c.tail_bound(a); }, c.a_threshold);
    ASSERT_EQ(ts.size(), 2u);
    EXPECT_EQ(ts[0].empirical.trials, 1000);
    EXPECT_NEAR(ts[0].empirical.p, 0.099, 1e-12);
    EXPECT_TRUE(ts[0].vacuous);
    EXPECT_FALSE(ts[0].in_regime);
    EXPECT_FALSE(ts[0].violated);
    EXPECT_TRUE(ts[1].in_regime);
    EXPECT_EQ(ts[1].empirical.p, 0.0);
}

TEST(TailEstimates, ViolationNeedsThreeStandardErrors) {
    std::vector<double> v(1000, 1.0);
    for (int k = 0; k < 500; ++k) v[static_cast<std::size_t>(k)] = 100.0;
    const auto ts = tail_estimates(v, {50}, [](double) { return 0.01; }, 10.0);
    EXPECT_TRUE(ts[0].violated);
    const auto out = tail_estimates(v, {50}, [](double) { return 0.01; }, 60.0);
    EXPECT_FALSE(out[0].violated);
}

TEST(TailSlope, RecoversParetoExponent) {
    // exact quantiles of P(X > a) = 1/a
    std::vector<double> v;
    const int total = 20000;
    for (int k = 1; k <= total; ++k) v.push_back(static_cast<double>(total) / (k - 0.5));
    const auto s = tail_slope(v);
    ASSERT_TRUE(s.ok);
    EXPECT_NEAR(s.fit.slope, -1.0, 0.02);
    EXPECT_NEAR(s.a_lo, s.a_hi / 10, 1e-12);
    EXPECT_FALSE(tail_slope(std::vector<double>(5, 1.0)).ok);
}

TEST(Expectation, SummaryOfKnownValues) {
    const std::vector<double> v{1.0, std::exp(1.0), std::exp(2.0), std::numeric_limits<double>::infinity()};
    const auto e = expectation_summary(v, 1.5);
    EXPECT_NEAR(e.mean_ln.mean, 1.0, 1e-12);
    EXPECT_EQ(e.excluded, 1);
    EXPECT_TRUE(e.nonnegative());
    EXPECT_FALSE(e.holds());  // 1 + 3 * (1/sqrt 3) > 1.5
}

TEST(Density, RejectsAlphaOutsideRegime) {
    const auto c = constants_K_a(3, {2, 2, 2});
    EXPECT_THROW(density_table({}, {3e-4}, c), std::invalid_argument);
    EXPECT_THROW(density_table({}, {0.0}, c), std::invalid_argument);
    auto cfg = small_config("density");
    cfg.n = 3, cfg.degrees = {2, 2, 2}, cfg.alpha_grid = {1e-5, 1e-3};
    cfg.output_dir = scratch_dir("density_cap").string();
    EXPECT_THROW(run_experiment(cfg), std::invalid_argument);
}

TEST(Density, CdfNondecreasing) {
    std::vector<ReplicateRecord> rs(50);
    for (int i = 0; i < 50; ++i) rs[static_cast<std::size_t>(i)].L_underline = 1e-6 * (i + 0.5);
    const auto c = constants_K_a(3, {2, 2, 2});
    const auto rows = density_table(rs, {1e-6, 1e-5, 2e-5, 1e-4}, c);
    for (std::size_t k = 1; k < rows.size(); ++k) EXPECT_GE(rows[k].empirical.p, rows[k - 1].empirical.p);
    EXPECT_NEAR(rows[1].empirical.p, 10.0 / 50, 1e-15);
    EXPECT_NEAR(rows[1].bound, c.density_coef * std::sqrt(1e-5), 1e-12);
}

TEST(Weyl, MedianAndTail) {
    auto cfg = small_config("weyl");
    cfg.n = 3, cfg.degrees = {2, 2, 2}, cfg.replicates = 20000;
    const auto rs = run_replicates(cfg, true);
    const auto s = weyl_summary(rs, cfg.eta_grid, 30.0);
    ASSERT_EQ(s.rows.size(), 4u);
    const double want = boost::math::cdf(boost::math::complement(boost::math::chi_squared(30.0), 30.0));
    EXPECT_NEAR(want, 0.5, 0.04);
    EXPECT_NEAR(s.rows[0].empirical.p, want, 4 * s.rows[0].empirical.se);
    EXPECT_NEAR(s.rows[2].bound, 1.002e-2, 1e-5);
    for (std::size_t k = 1; k < s.rows.size(); ++k) {
        EXPECT_LE(s.rows[k].bound, s.rows[k - 1].bound);
        EXPECT_TRUE(s.rows[k].holds());
    }
    EXPECT_TRUE(s.mean_ok());
    EXPECT_TRUE(s.variance_ok());
    EXPECT_TRUE(bound_failures(cfg, rs).empty());
}

TEST(Sandwich, AuditFlagsExcursions) {
    std::vector<ReplicateRecord> rs(3);
    rs[0].kappa_tilde = 10, rs[0].kappa = 10;
    rs[1].kappa_tilde = 10, rs[1].kappa = 10 * std::sqrt(6.0) * 1.01;
    rs[2].kappa_tilde = 10;  // kappa not computed
    const auto a = sandwich_audit(rs, 3, 1e-6);
    EXPECT_EQ(a.checked, 2);
    EXPECT_EQ(a.violations, 1);
    EXPECT_NEAR(a.worst_ratio, 0.01, 1e-12);
}

TEST(Artifacts, NamesAndHeader) {
    ExperimentConfig c;
    c.experiment = "tail", c.n = 3, c.degrees = {2, 3, 2}, c.seed = 7;
    EXPECT_EQ(artifact_stem(c), "tail_3_2-3-2_7");
    EXPECT_EQ(std::string(kCsvHeader), "replicate,substream_id,kappa_tilde,kappa,L_underline,weyl_sq,converged,starts_used");
    EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "");
    EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Config, ValidationErrors) {
    auto c = small_config("tail");
    c.degrees = {2};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config("tail");
    c.a_grid = {10, 5};
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config("tail");
    c.replicates = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = small_config("nonsense");
    c.output_dir = scratch_dir("bad_kind").string();
    EXPECT_THROW(run_experiment(c), std::invalid_argument);
}

TEST(Replicates, IndependentOfWorkerCount) {
    auto c = small_config("tail");
    const auto one = run_replicates(c);
    c.jobs = 3;
    const auto three = run_replicates(c);
    std::ostringstream a, b;
    write_csv(a, one);
    write_csv(b, three);
    EXPECT_EQ(a.str(), b.str());
    for (std::size_t i = 0; i < one.size(); ++i) {
        EXPECT_EQ(one[i].replicate, static_cast<std::int64_t>(i));
        EXPECT_GE(one[i].kappa_tilde, 1.0);
    }
}

TEST(Replicates, AuditRerunsEveryHundredth) {
    auto c = small_config("tail");
    c.replicates = 101;
    c.optimizer.starts = 4;
    const auto rs = run_replicates(c);
    int audited = 0;
    for (const auto& r : rs)
        if (!std::isnan(r.audit_kappa_tilde)) {
            ++audited;
            EXPECT_GE(r.audit_kappa_tilde, 1.0);
        }
    EXPECT_EQ(audited, 2);
}

TEST(RunExperiment, WritesManifestBeforeAndAfter) {
    auto c = small_config("tail");
    c.output_dir = scratch_dir("run").string();
    const auto paths = experiment_paths(c);
    std::string status_during;
    const auto m = run_experiment(c, [&](std::int64_t done, std::int64_t) {
        if (done == 1) status_during = nlohmann::json::parse(slurp(paths.manifest)).at("status");
    });
    EXPECT_EQ(status_during, "running");
    const auto j = nlohmann::json::parse(slurp(paths.manifest));
    EXPECT_EQ(j.at("status"), "complete");
    EXPECT_EQ(j.at("records").size(), 24u);
    EXPECT_FALSE(j.at("results").at("in_theorem_scope").get<bool>());
    EXPECT_TRUE(j.at("results").contains("bias_audit"));
    const std::string csv = slurp(paths.csv);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 25);
    EXPECT_EQ(paths.csv.filename(), "tail_2_2-2_11.csv");
    EXPECT_EQ(m.status, "complete");
}

TEST(RunExperiment, RerunIsBitIdentical) {
    auto c = small_config("expectation");
    c.output_dir = scratch_dir("rerun_a").string();
    run_experiment(c);
    const auto a = experiment_paths(c);
    auto d = c;
    d.output_dir = scratch_dir("rerun_b").string();
    d.jobs = 2;
    run_experiment(d);
    const auto b = experiment_paths(d);
    EXPECT_EQ(slurp(a.csv), slurp(b.csv));
    auto ja = nlohmann::json::parse(slurp(a.manifest)), jb = nlohmann::json::parse(slurp(b.manifest));
    EXPECT_EQ(ja.at("records"), jb.at("records"));
    EXPECT_EQ(ja.at("results"), jb.at("results"));
}

TEST(RunExperiment, KappaRunPassesSandwich) {
    auto c = small_config("tail");
    c.n = 3, c.degrees = {2, 2, 2}, c.replicates = 6, c.with_kappa = true;
    c.optimizer.starts = 16;
    const auto rs = run_replicates(c);
    EXPECT_EQ(sandwich_audit(rs, 3, 1e-6).violations, 0);
    EXPECT_EQ(sandwich_audit(rs, 3, 1e-6).checked, 6);
    EXPECT_TRUE(bound_failures(c, rs).empty());
}
