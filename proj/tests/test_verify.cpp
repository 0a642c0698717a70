#include <gtest/gtest.h>

#include <sstream>

#include <polycond/polycond.hpp>

using namespace polycond;

// Reduced trial counts; the full counts run in the acceptance binary.

TEST(VerifySuites, CovarianceSmall) {
    const auto cs = run_verify_suite("covariance", 4000, 3);
    EXPECT_TRUE(all_passed(cs));
    for (const auto& c : cs) EXPECT_TRUE(c.passed) << c.name << " value " << c.value << " limit " << c.limit;
}

TEST(VerifySuites, MatrixSmall) {
    const auto cs = run_verify_suite("matrix", 100, 3);
    for (const auto& c : cs) EXPECT_TRUE(c.passed) << c.name << " value " << c.value;
}

TEST(VerifySuites, GeometrySmall) {
    const auto cs = run_verify_suite("geometry", 10, 3);
    for (const auto& c : cs) EXPECT_TRUE(c.passed) << c.name << " value " << c.value;
}

TEST(VerifySuites, RmtSmall) {
    const auto cs = run_verify_suite("rmt", 20000, 3);
    for (const auto& c : cs) EXPECT_TRUE(c.passed) << c.name << " value " << c.value;
}

TEST(VerifySuites, UnknownSuite) {
    EXPECT_THROW(run_verify_suite("nope", 10, 1), std::invalid_argument);
}

TEST(VerifySuites, ReportFormats) {
    CheckList cs{verify::check("s", "a", 0.5, 1.0), verify::check("s", "b", 2.0, 1.0)};
    EXPECT_TRUE(cs[0].passed);
    EXPECT_FALSE(cs[1].passed);
    EXPECT_FALSE(all_passed(cs));
    std::ostringstream os;
    print_checks(os, cs);
    EXPECT_NE(os.str().find("FAIL"), std::string::npos);
    const auto j = to_json(cs);
    EXPECT_EQ(j["passed"], false);
    ASSERT_EQ(j["checks"].size(), 2u);
    EXPECT_EQ(j["checks"][1]["passed"], false);
    EXPECT_EQ(default_trials("matrix"), 1000);
}
