#pragma once

// Small statistics helpers for the Monte Carlo checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace polycond {

struct MonteCarloMean {
    double mean = 0.0;
    double se = 0.0;
    std::int64_t trials = 0;
};

/// Mean, variance and standard error by Welford's update.
class RunningStats {
public:
    void add(double v) {
        ++n_;
        const double d = v - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (v - mean_);
    }
    std::int64_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    double se() const { return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }
    MonteCarloMean summary() const { return {mean(), se(), n_}; }

private:
    std::int64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Proportion with its binomial standard error.
struct Proportion {
    double p = 0.0;
    double se = 0.0;
    std::int64_t hits = 0;
    std::int64_t trials = 0;
};

inline Proportion proportion(std::int64_t hits, std::int64_t trials) {
    if (trials <= 0) throw std::invalid_argument("proportion: trials must be > 0");
    const double p = static_cast<double>(hits) / static_cast<double>(trials);
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials)), hits, trials};
}

/// Standard error of the sample variance, assuming finite fourth moment.
inline double variance_se(const std::vector<double>& xs) {
    const auto n = static_cast<double>(xs.size());
    if (xs.size() < 4) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= n;
    m4 /= n;
    return std::sqrt(std::max(0.0, (m4 - m2 * m2) / n));
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Asymptotic Kolmogorov distribution tail Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_tail(double lambda) {
    if (lambda < 1e-3) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

/// Two-sample Kolmogorov-Smirnov test with the Stephens small-sample correction.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d)};
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols: need at least two paired points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("ols: x values are all equal");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.points = x.size();
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double r = y[k] - f.intercept - f.slope * x[k];
            rss += r * r;
        }
        f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return f;
}

}  // namespace polycond
