#pragma once

// Replicated Monte Carlo runs over random systems and the summaries computed
// from them: tail of kappa_tilde against the theorem bound, mean of
// ln kappa_tilde, the small-ball CDF of L_underline, and the chi-square tail
// of the Weyl norm.
//
// Replicate i draws its system from stream (seed, system:i) and its optimizer
// starts from (seed, optimizer_starts:i), so results do not depend on how
// replicates are scheduled across workers.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "condition.hpp"
#include "poly_core.hpp"
#include "random_model.hpp"
#include "rng.hpp"
#include "stats.hpp"

#ifndef POLYCOND_VERSION
#define POLYCOND_VERSION "0.1.0"
#endif

namespace polycond {

inline constexpr const char* kCodeVersion = POLYCOND_VERSION;

struct ExperimentConfig {
    std::string experiment = "tail";  ///< tail | expectation | density | weyl
    int n = 3;
    std::vector<int> degrees{2, 2, 2};
    std::int64_t replicates = 10000;
    std::uint64_t seed = 1;
    OptimizerOptions optimizer;
    bool with_kappa = false;  ///< also compute kappa (costlier) for every replicate
    std::vector<double> a_grid{10, 30, 100, 300, 1000, 3000, 1e4, 3e4, 1e5, 3e5};
    std::vector<double> alpha_grid{1e-7, 1e-6, 1e-5, 3e-5, 1e-4, 2.5e-4};
    std::vector<double> eta_grid{0.0, 0.5, 1.0, 2.0};
    std::string output_dir = ".";
    int jobs = 0;  ///< 0 selects the available hardware parallelism

    int effective_jobs() const {
        if (jobs > 0) return jobs;
        return std::max(1u, std::thread::hardware_concurrency());
    }

    void validate() const {
        if (n < 1) throw std::invalid_argument("config: n must be >= 1");
        if (static_cast<int>(degrees.size()) != n)
            throw std::invalid_argument("config: expected " + std::to_string(n) + " degrees, got " +
                                        std::to_string(degrees.size()));
        for (int d : degrees)
            if (d < 1) throw std::invalid_argument("config: degrees must be >= 1");
        if (replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
        auto increasing = [](const std::vector<double>& g, bool allow_zero, const char* name) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (!std::isfinite(g[i]) || g[i] < 0.0 || (!allow_zero && g[i] == 0.0))
                    throw std::invalid_argument(std::string("config: ") + name + " entries must be positive");
                if (i > 0 && !(g[i] > g[i - 1]))
                    throw std::invalid_argument(std::string("config: ") + name + " must be strictly increasing");
            }
        };
        increasing(a_grid, false, "a_grid");
        increasing(alpha_grid, false, "alpha_grid");
        increasing(eta_grid, true, "eta_grid");
        if (optimizer.starts < 0) throw std::invalid_argument("config: starts must be >= 0");
        if (!(optimizer.tol > 0.0)) throw std::invalid_argument("config: tol must be > 0");
        if (optimizer.max_iter < 1) throw std::invalid_argument("config: max_iter must be >= 1");
        if (!(optimizer.fd_step > 0.0)) throw std::invalid_argument("config: fd_step must be > 0");
    }

    /// The bounds are proved for n >= 3; smaller n is run for speed only.
    bool in_theorem_scope() const { return n >= 3; }
};

/// Constants of the tail, expectation and density bounds for a degree pattern.
struct TheoremConstants {
    ModelConstants model;
    int n = 0;
    double K = 0.0;                ///< 8 D^2 B^{1/2} N^{1/2} n^{5/2} + 1
    double a_threshold = 0.0;      ///< tail bound holds for a > 4 D^2 n^3 N^{1/2}
    double kappa_threshold = 0.0;  ///< 4 sqrt(2) D^2 n^{7/2} N^{1/2}
    double kappa_prefactor = 0.0;  ///< sqrt(2n)
    double density_coef = 0.0;     ///< P(L_underline < alpha) <= density_coef sqrt(alpha)
    double alpha_cap = 0.0;        ///< ... for alpha < 1 / (4 D^2 n^5)

    double tail_bound(double a) const { return K * std::sqrt(1.0 + std::log(a)) / a; }
    double kappa_tail_bound(double a) const { return kappa_prefactor * tail_bound(a / kappa_prefactor); }
    double expectation_bound() const {
        const double l = std::log(K);
        return l + std::sqrt(l) + 1.0 / std::sqrt(l);
    }
    double kappa_expectation_bound() const { return expectation_bound() + 0.5 * std::log(2.0 * n); }
    double density_bound(double alpha) const { return density_coef * std::sqrt(alpha); }
};

inline TheoremConstants constants_K_a(int n, const std::vector<int>& degrees) {
    TheoremConstants c;
    c.model = model_constants(degrees, n);
    c.n = n;
    const double D2 = static_cast<double>(c.model.max_degree) * c.model.max_degree;
    const double sqB = std::sqrt(static_cast<double>(c.model.bezout));
    const double sqN = std::sqrt(static_cast<double>(c.model.dim));
    const double nn = n;
    c.K = 8.0 * D2 * sqB * sqN * std::pow(nn, 2.5) + 1.0;
    c.a_threshold = 4.0 * D2 * nn * nn * nn * sqN;
    c.kappa_threshold = 4.0 * std::numbers::sqrt2 * D2 * std::pow(nn, 3.5) * sqN;
    c.kappa_prefactor = std::sqrt(2.0 * nn);
    c.density_coef = 8.0 * D2 * sqB * std::pow(nn, 2.5);
    c.alpha_cap = 1.0 / (4.0 * D2 * std::pow(nn, 5.0));
    return c;
}

struct ReplicateRecord {
    std::int64_t replicate = 0;
    std::uint64_t substream_id = 0;  ///< stream of the system draw
    double kappa_tilde = std::numeric_limits<double>::quiet_NaN();
    double kappa = std::numeric_limits<double>::quiet_NaN();
    double L_underline = std::numeric_limits<double>::quiet_NaN();
    double weyl_sq = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    int starts_used = 0;
    int converged_starts = 0;
    bool used_fallback = false;
    double audit_kappa_tilde = std::numeric_limits<double>::quiet_NaN();  ///< rerun with 4x starts, 1% of replicates
    std::string error;
};

/// Replicates with index divisible by this are rerun with four times the starts.
inline constexpr std::int64_t kAuditStride = 100;

inline ReplicateRecord run_replicate(const ExperimentConfig& cfg, std::int64_t i, bool sample_only = false) {
    ReplicateRecord r;
    r.replicate = i;
    r.substream_id = make_stream_id(StreamTag::system, static_cast<std::uint64_t>(i));
    try {
        RngStream rng(cfg.seed, r.substream_id);
        const PolySystem f = sample_system(cfg.degrees, cfg.n, rng);
        const double l2 = f.norms().l2_weyl;
        r.weyl_sq = l2 * l2;
        if (sample_only) {
            r.converged = true;
            return r;
        }
        OptimizerOptions opt = cfg.optimizer;
        opt.seed = cfg.seed;
        opt.stream_id = make_stream_id(StreamTag::optimizer_starts, static_cast<std::uint64_t>(i));
        const ConditionReport rep = cfg.with_kappa ? condition_numbers(f, opt) : kappa_tilde(f, opt);
        r.kappa_tilde = rep.kappa_tilde;
        r.kappa = rep.kappa;
        r.L_underline = rep.L_underline;
        r.converged = rep.converged;
        r.starts_used = rep.starts_used;
        r.converged_starts = rep.converged_starts;
        r.used_fallback = rep.used_fallback;
        if (i % kAuditStride == 0) {
            OptimizerOptions big = opt;
            big.starts = 4 * opt.effective_starts(cfg.n);
            r.audit_kappa_tilde = kappa_tilde(f, big).kappa_tilde;
        }
    } catch (const std::exception& e) {
        r.converged = false;
        r.error = e.what();
    }
    return r;
}

using ProgressFn = std::function<void(std::int64_t done, std::int64_t total)>;

/// Runs all replicates on cfg.effective_jobs() workers. The result is ordered
/// by replicate index and independent of the worker count.
inline std::vector<ReplicateRecord> run_replicates(const ExperimentConfig& cfg, bool sample_only = false,
                                                   const ProgressFn& progress = {}) {
    cfg.validate();
    const std::int64_t total = cfg.replicates;
    std::vector<ReplicateRecord> out(static_cast<std::size_t>(total));
    std::atomic<std::int64_t> next{0};
    std::atomic<std::int64_t> done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::int64_t i = next++; i < total; i = next++) {
            out[static_cast<std::size_t>(i)] = run_replicate(cfg, i, sample_only);
            const std::int64_t d = ++done;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(d, total);
            }
        }
    };
    const int jobs = static_cast<int>(std::min<std::int64_t>(cfg.effective_jobs(), total));
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return out;
}

// ---------------------------------------------------------------- summaries

struct TailEstimate {
    double a = 0.0;
    Proportion empirical;
    double theoretical_bound = 0.0;  ///< formula value, reported even out of regime
    bool in_regime = false;          ///< a above the threshold where the bound is proved
    bool vacuous = false;            ///< bound >= 1
    bool violated = false;           ///< in regime and empirical - 3 SE > bound
};

/// Empirical P(value > a) over the finite entries of values.
inline std::vector<TailEstimate> tail_estimates(const std::vector<double>& values, const std::vector<double>& a_grid,
                                                const std::function<double(double)>& bound, double threshold) {
    std::vector<TailEstimate> out;
    std::int64_t total = 0;
    for (double v : values)
        if (!std::isnan(v)) ++total;
    if (total == 0) return out;
    for (double a : a_grid) {
        std::int64_t hits = 0;
        for (double v : values)
            if (!std::isnan(v) && v > a) ++hits;
        TailEstimate t;
        t.a = a;
        t.empirical = proportion(hits, total);
        t.theoretical_bound = bound(a);
        t.in_regime = a > threshold;
        t.vacuous = t.theoretical_bound >= 1.0;
        t.violated = t.in_regime && t.empirical.p - 3.0 * t.empirical.se > t.theoretical_bound;
        out.push_back(t);
    }
    return out;
}

inline std::vector<double> column_kappa_tilde(const std::vector<ReplicateRecord>& rs) {
    std::vector<double> v;
    v.reserve(rs.size());
    for (const auto& r : rs) v.push_back(r.kappa_tilde);
    return v;
}

struct SlopeFit {
    LineFit fit;
    double a_lo = 0.0;
    double a_hi = 0.0;
    bool ok = false;
};

/// Log-log slope of the empirical tail over the top decade of observed values:
/// regress ln(k / N) on ln v_(k), where v_(k) is the k-th largest value and the
/// fitted range runs from the 10th largest value down to a tenth of it.
inline SlopeFit tail_slope(std::vector<double> values) {
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
                 values.end());
    SlopeFit s;
    if (values.size() < 20) return s;
    std::sort(values.begin(), values.end(), std::greater<>());
    const double total = static_cast<double>(values.size());
    s.a_hi = values[9];
    s.a_lo = s.a_hi / 10.0;
    std::vector<double> x, y;
    for (std::size_t k = 9; k < values.size() && values[k] >= s.a_lo; ++k) {
        x.push_back(std::log(values[k]));
        y.push_back(std::log(static_cast<double>(k + 1) / total));
    }
    if (x.size() < 3) return s;
    s.fit = ols(x, y);
    s.ok = true;
    return s;
}

struct ExpectationSummary {
    MonteCarloMean mean_ln;  ///< of ln kappa_tilde (or ln kappa)
    double bound = 0.0;
    std::int64_t excluded = 0;  ///< replicates without a finite value
    bool holds() const { return mean_ln.mean + 3.0 * mean_ln.se <= bound; }
    bool nonnegative() const { return mean_ln.mean >= 0.0; }
};

inline ExpectationSummary expectation_summary(const std::vector<double>& values, double bound) {
    RunningStats st;
    ExpectationSummary e;
    for (double v : values) {
        if (std::isfinite(v) && v > 0.0)
            st.add(std::log(v));
        else
            ++e.excluded;
    }
    e.mean_ln = st.summary();
    e.bound = bound;
    return e;
}

struct DensityRow {
    double alpha = 0.0;
    Proportion empirical;  ///< P(L_underline < alpha)
    double bound = 0.0;
    bool holds() const { return empirical.p - 3.0 * empirical.se <= bound; }
};

inline std::vector<DensityRow> density_table(const std::vector<ReplicateRecord>& rs, const std::vector<double>& alphas,
                                             const TheoremConstants& c) {
    for (double a : alphas)
        if (!(a > 0.0 && a < c.alpha_cap))
            throw std::invalid_argument("density: alpha " + std::to_string(a) + " is outside (0, " +
                                        std::to_string(c.alpha_cap) + ")");
    std::int64_t total = 0;
    for (const auto& r : rs)
        if (!std::isnan(r.L_underline)) ++total;
    std::vector<DensityRow> out;
    if (total == 0) return out;
    for (double a : alphas) {
        std::int64_t hits = 0;
        for (const auto& r : rs)
            if (!std::isnan(r.L_underline) && r.L_underline < a) ++hits;
        out.push_back({a, proportion(hits, total), c.density_bound(a)});
    }
    return out;
}

struct WeylRow {
    double eta = 0.0;
    Proportion empirical;  ///< P(||f||_W^2 >= (1 + eta) N)
    double bound = 1.0;
    bool holds() const { return empirical.p - 3.0 * empirical.se <= bound; }
};

struct WeylSummary {
    std::vector<WeylRow> rows;
    MonteCarloMean mean;  ///< of ||f||_W^2, expected N
    double variance = 0.0;
    double variance_se = 0.0;  ///< expected variance 2N
    double dim = 0.0;
    bool mean_ok() const { return std::abs(mean.mean - dim) <= 3.0 * mean.se; }
    bool variance_ok() const { return std::abs(variance - 2.0 * dim) <= 5.0 * variance_se; }
};

inline WeylSummary weyl_summary(const std::vector<ReplicateRecord>& rs, const std::vector<double>& etas, double dim) {
    WeylSummary s;
    s.dim = dim;
    std::vector<double> w;
    RunningStats st;
    for (const auto& r : rs)
        if (std::isfinite(r.weyl_sq)) {
            w.push_back(r.weyl_sq);
            st.add(r.weyl_sq);
        }
    if (w.empty()) return s;
    s.mean = st.summary();
    s.variance = st.variance();
    s.variance_se = variance_se(w);
    for (double eta : etas) {
        std::int64_t hits = 0;
        for (double v : w)
            if (v >= (1.0 + eta) * dim) ++hits;
        WeylRow row;
        row.eta = eta;
        row.empirical = proportion(hits, static_cast<std::int64_t>(w.size()));
        row.bound = eta > 0.0 ? weyl_sq_tail_bound(eta, dim) : 1.0;
        s.rows.push_back(row);
    }
    return s;
}

struct SandwichAudit {
    std::int64_t checked = 0;
    std::int64_t violations = 0;
    double worst_ratio = 0.0;  ///< largest relative excursion outside the sandwich
};

/// kappa_tilde / sqrt(n) <= kappa <= sqrt(2n) kappa_tilde, with relative slack tol.
inline SandwichAudit sandwich_audit(const std::vector<ReplicateRecord>& rs, int n, double tol) {
    SandwichAudit a;
    const double lo_f = 1.0 / std::sqrt(static_cast<double>(n));
    const double hi_f = std::sqrt(2.0 * n);
    for (const auto& r : rs) {
        if (!std::isfinite(r.kappa) || !std::isfinite(r.kappa_tilde)) continue;
        ++a.checked;
        const double lo = lo_f * r.kappa_tilde, hi = hi_f * r.kappa_tilde;
        const double excess = std::max((lo - r.kappa) / lo, (r.kappa - hi) / hi);
        a.worst_ratio = std::max(a.worst_ratio, excess);
        if (excess > tol) ++a.violations;
    }
    return a;
}

struct BiasAudit {
    std::int64_t audited = 0;
    std::int64_t increased = 0;         ///< more starts found a larger kappa_tilde
    double max_relative_increase = 0.0;
};

inline BiasAudit bias_audit(const std::vector<ReplicateRecord>& rs) {
    BiasAudit b;
    for (const auto& r : rs) {
        if (std::isnan(r.audit_kappa_tilde) || !std::isfinite(r.kappa_tilde)) continue;
        ++b.audited;
        const double rel = (r.audit_kappa_tilde - r.kappa_tilde) / r.kappa_tilde;
        if (rel > 1e-9) ++b.increased;
        b.max_relative_increase = std::max(b.max_relative_increase, rel);
    }
    return b;
}

// ---------------------------------------------------------------- artifacts

/// Shortest decimal that round-trips; NaN becomes an empty field.
inline std::string format_double(double v) {
    if (std::isnan(v)) return {};
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string join_degrees(const std::vector<int>& degrees, char sep = '-') {
    std::string s;
    for (std::size_t i = 0; i < degrees.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(degrees[i]);
    }
    return s;
}

inline std::string artifact_stem(const ExperimentConfig& cfg) {
    return cfg.experiment + "_" + std::to_string(cfg.n) + "_" + join_degrees(cfg.degrees) + "_" +
           std::to_string(cfg.seed);
}

inline constexpr const char* kCsvHeader =
    "replicate,substream_id,kappa_tilde,kappa,L_underline,weyl_sq,converged,starts_used";

inline void write_csv(std::ostream& os, const std::vector<ReplicateRecord>& rs) {
    os << kCsvHeader << '\n';
    for (const auto& r : rs) {
        os << r.replicate << ',' << r.substream_id << ',' << format_double(r.kappa_tilde) << ','
           << format_double(r.kappa) << ',' << format_double(r.L_underline) << ',' << format_double(r.weyl_sq)
           << ',' << (r.converged ? 1 : 0) << ',' << r.starts_used << '\n';
    }
}

namespace detail {
inline nlohmann::json num(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}
inline nlohmann::json prop(const Proportion& p) {
    return {{"p", p.p}, {"se", p.se}, {"hits", p.hits}, {"trials", p.trials}};
}
}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"experiment", c.experiment},
            {"n", c.n},
            {"degrees", c.degrees},
            {"replicates", c.replicates},
            {"seed", c.seed},
            {"with_kappa", c.with_kappa},
            {"starts", c.optimizer.effective_starts(c.n)},
            {"tol", c.optimizer.tol},
            {"max_iter", c.optimizer.max_iter},
            {"fd_step", c.optimizer.fd_step},
            {"step_tol", c.optimizer.step_tol},
            {"a_grid", c.a_grid},
            {"alpha_grid", c.alpha_grid},
            {"eta_grid", c.eta_grid},
            {"output_dir", c.output_dir},
            {"in_theorem_scope", c.in_theorem_scope()}};
}

inline nlohmann::json to_json(const ReplicateRecord& r) {
    nlohmann::json j{{"replicate", r.replicate},
                     {"substream_id", r.substream_id},
                     {"optimizer_stream_id", make_stream_id(StreamTag::optimizer_starts, static_cast<std::uint64_t>(r.replicate))},
                     {"kappa_tilde", detail::num(r.kappa_tilde)},
                     {"kappa", detail::num(r.kappa)},
                     {"L_underline", detail::num(r.L_underline)},
                     {"weyl_sq", detail::num(r.weyl_sq)},
                     {"converged", r.converged},
                     {"starts_used", r.starts_used},
                     {"converged_starts", r.converged_starts},
                     {"used_fallback", r.used_fallback}};
    if (!std::isnan(r.audit_kappa_tilde)) j["audit_kappa_tilde"] = r.audit_kappa_tilde;
    if (!r.error.empty()) j["error"] = r.error;
    return j;
}

inline nlohmann::json to_json(const TheoremConstants& c) {
    return {{"max_degree", c.model.max_degree}, {"bezout", c.model.bezout},     {"dim", c.model.dim},
            {"K", c.K},                         {"a_threshold", c.a_threshold}, {"kappa_threshold", c.kappa_threshold},
            {"kappa_prefactor", c.kappa_prefactor}, {"density_coef", c.density_coef}, {"alpha_cap", c.alpha_cap},
            {"expectation_bound", c.expectation_bound()}, {"kappa_expectation_bound", c.kappa_expectation_bound()}};
}

inline nlohmann::json to_json(const std::vector<TailEstimate>& ts) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& t : ts)
        a.push_back({{"a", t.a},
                     {"empirical", detail::prop(t.empirical)},
                     {"bound", t.theoretical_bound},
                     {"in_regime", t.in_regime},
                     {"vacuous", t.vacuous},
                     {"violated", t.violated}});
    return a;
}

inline nlohmann::json to_json(const SlopeFit& s) {
    return {{"ok", s.ok}, {"slope", s.fit.slope}, {"slope_se", s.fit.slope_se}, {"points", s.fit.points},
            {"a_lo", s.a_lo}, {"a_hi", s.a_hi}};
}

inline nlohmann::json to_json(const ExpectationSummary& e) {
    return {{"mean_ln", e.mean_ln.mean}, {"se", e.mean_ln.se},   {"count", e.mean_ln.trials},
            {"excluded", e.excluded},    {"bound", e.bound},     {"holds", e.holds()},
            {"nonnegative", e.nonnegative()}};
}

inline nlohmann::json to_json(const std::vector<DensityRow>& rows) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : rows)
        a.push_back({{"alpha", r.alpha}, {"empirical", detail::prop(r.empirical)}, {"bound", r.bound}, {"holds", r.holds()}});
    return a;
}

inline nlohmann::json to_json(const WeylSummary& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"eta", r.eta}, {"empirical", detail::prop(r.empirical)}, {"bound", r.bound}, {"holds", r.holds()}});
    return {{"rows", rows},          {"mean", s.mean.mean},         {"mean_se", s.mean.se},
            {"variance", s.variance}, {"variance_se", s.variance_se}, {"dim", s.dim},
            {"mean_ok", s.mean_ok()}, {"variance_ok", s.variance_ok()}};
}

/// Everything needed to reproduce a run, plus its records and summaries.
struct RunManifest {
    ExperimentConfig config;
    std::string status = "running";  ///< running | complete
    std::vector<ReplicateRecord> records;
    nlohmann::json results = nlohmann::json::object();
    double wall_clock_seconds = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : records) recs.push_back(polycond::to_json(r));
        return {{"status", status},
                {"code_version", kCodeVersion},
                {"rng", std::string(kRngDescription)},
                {"certification", to_string(Certification::heuristic)},
                {"config", polycond::to_json(config)},
                {"constants", polycond::to_json(constants_K_a(config.n, config.degrees))},
                {"results", results},
                {"records", recs},
                {"wall_clock_seconds", wall_clock_seconds}};
    }
};

/// Writes via a temporary file and rename so readers never see a torn file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << contents;
        if (!os.flush()) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
    write_file_atomic(path, m.to_json().dump(2) + "\n");
}

/// Bound checks that fail for this run; empty means every check passed.
/// Theorem bounds are only checked for n >= 3.
inline std::vector<std::string> bound_failures(const ExperimentConfig& cfg, const std::vector<ReplicateRecord>& rs) {
    std::vector<std::string> out;
    const TheoremConstants c = constants_K_a(cfg.n, cfg.degrees);
    if (cfg.experiment == "weyl") {
        const auto w = weyl_summary(rs, cfg.eta_grid, static_cast<double>(c.model.dim));
        for (const auto& row : w.rows)
            if (!row.holds()) out.push_back("weyl tail at eta=" + format_double(row.eta));
        if (!w.mean_ok()) out.push_back("weyl mean");
        if (!w.variance_ok()) out.push_back("weyl variance");
        return out;
    }
    if (!cfg.in_theorem_scope()) return out;
    const auto kt = column_kappa_tilde(rs);
    if (cfg.experiment == "tail")
        for (const auto& t : tail_estimates(kt, cfg.a_grid, [&](double a) { return c.tail_bound(a); }, c.a_threshold))
            if (t.violated) out.push_back("kappa_tilde tail at a=" + format_double(t.a));
    if (cfg.experiment == "tail" || cfg.experiment == "expectation") {
        const auto e = expectation_summary(kt, c.expectation_bound());
        if (!e.holds()) out.push_back("E ln kappa_tilde above bound");
        if (!e.nonnegative()) out.push_back("E ln kappa_tilde negative");
    }
    if (cfg.experiment == "density")
        for (const auto& row : density_table(rs, cfg.alpha_grid, c))
            if (!row.holds()) out.push_back("L_underline CDF at alpha=" + format_double(row.alpha));
    if (cfg.with_kappa) {
        std::vector<double> kv;
        for (const auto& r : rs) kv.push_back(r.kappa);
        for (const auto& t : tail_estimates(kv, cfg.a_grid, [&](double a) { return c.kappa_tail_bound(a); },
                                            c.kappa_threshold))
            if (t.violated) out.push_back("kappa tail at a=" + format_double(t.a));
        if (!expectation_summary(kv, c.kappa_expectation_bound()).holds()) out.push_back("E ln kappa above bound");
        if (sandwich_audit(rs, cfg.n, 1e-6).violations > 0) out.push_back("sandwich");
    }
    return out;
}

/// Summaries for the experiment named in the config.
inline nlohmann::json summarize(const ExperimentConfig& cfg, const std::vector<ReplicateRecord>& rs) {
    const TheoremConstants c = constants_K_a(cfg.n, cfg.degrees);
    nlohmann::json out;
    out["in_theorem_scope"] = cfg.in_theorem_scope();
    std::int64_t failed = 0, unconverged = 0;
    for (const auto& r : rs) {
        if (!r.error.empty()) ++failed;
        if (!r.converged) ++unconverged;
    }
    out["failed_replicates"] = failed;
    out["unconverged_replicates"] = unconverged;
    if (cfg.experiment == "weyl") {
        out["weyl"] = to_json(weyl_summary(rs, cfg.eta_grid, static_cast<double>(c.model.dim)));
        out["failures"] = bound_failures(cfg, rs);
        return out;
    }
    const auto kt = column_kappa_tilde(rs);
    const auto bias = bias_audit(rs);
    out["bias_audit"] = {{"audited", bias.audited},
                         {"increased", bias.increased},
                         {"max_relative_increase", bias.max_relative_increase},
                         {"direction", "multistart kappa_tilde can only understate the true value"}};
    if (cfg.experiment == "tail") {
        out["tail"] = to_json(tail_estimates(kt, cfg.a_grid, [&](double a) { return c.tail_bound(a); }, c.a_threshold));
        out["slope"] = to_json(tail_slope(kt));
    }
    if (cfg.experiment == "expectation" || cfg.experiment == "tail")
        out["expectation"] = to_json(expectation_summary(kt, c.expectation_bound()));
    if (cfg.experiment == "density") out["density"] = to_json(density_table(rs, cfg.alpha_grid, c));
    if (cfg.with_kappa) {
        std::vector<double> kv;
        for (const auto& r : rs) kv.push_back(r.kappa);
        out["kappa_tail"] = to_json(
            tail_estimates(kv, cfg.a_grid, [&](double a) { return c.kappa_tail_bound(a); }, c.kappa_threshold));
        out["kappa_expectation"] = to_json(expectation_summary(kv, c.kappa_expectation_bound()));
        const auto s = sandwich_audit(rs, cfg.n, 1e-6);
        out["sandwich"] = {{"checked", s.checked}, {"violations", s.violations}, {"worst_excess", s.worst_ratio}};
    }
    out["failures"] = bound_failures(cfg, rs);
    return out;
}

struct ExperimentPaths {
    std::filesystem::path csv;
    std::filesystem::path manifest;
};

inline ExperimentPaths experiment_paths(const ExperimentConfig& cfg) {
    const std::filesystem::path dir(cfg.output_dir);
    const std::string stem = artifact_stem(cfg);
    return {dir / (stem + ".csv"), dir / (stem + ".json")};
}

/// Full run: a "running" manifest first, then the replicates, then the CSV
/// and the completed manifest. Only the weyl experiment skips the optimizer.
inline RunManifest run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
    cfg.validate();
    if (cfg.experiment != "tail" && cfg.experiment != "expectation" && cfg.experiment != "density" &&
        cfg.experiment != "weyl")
        throw std::invalid_argument("unknown experiment '" + cfg.experiment + "'");
    if (cfg.experiment == "density") {
        const auto c = constants_K_a(cfg.n, cfg.degrees);
        for (double a : cfg.alpha_grid)
            if (!(a < c.alpha_cap))
                throw std::invalid_argument("density: alpha " + format_double(a) + " is not below the cap " +
                                            format_double(c.alpha_cap));
    }
    const auto paths = experiment_paths(cfg);
    std::filesystem::create_directories(cfg.output_dir);
    RunManifest m;
    m.config = cfg;
    write_manifest(paths.manifest, m);

    const auto t0 = std::chrono::steady_clock::now();
    m.records = run_replicates(cfg, cfg.experiment == "weyl", progress);
    m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.results = summarize(cfg, m.records);
    m.status = "complete";

    std::ostringstream csv;
    write_csv(csv, m.records);
    write_file_atomic(paths.csv, csv.str());
    write_manifest(paths.manifest, m);
    return m;
}

}  // namespace polycond
