// polycond: sample random systems, compute condition numbers, run the Monte
// Carlo experiments and the verification suites.
//
// Exit codes: 0 success, 1 a check or bound failed, 2 usage or input error.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <polycond/polycond.hpp>

namespace {

using namespace polycond;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Writes to the named file, or to stdout for "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (path == "-") return;
        file_.open(path, std::ios::binary);
        if (!file_) throw UsageError("cannot open '" + path + "' for writing");
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

private:
    std::ofstream file_;
};

std::vector<int> checked_degrees(int n, const std::string& text) {
    std::vector<int> d;
    try {
        d = parse_degrees(text);
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
    if (static_cast<int>(d.size()) != n)
        throw UsageError("--degrees lists " + std::to_string(d.size()) + " degrees but --n is " + std::to_string(n));
    for (int x : d)
        if (x < 1) throw UsageError("degrees must be >= 1");
    return d;
}

class Progress {
public:
    Progress(std::string label, bool quiet) : label_(std::move(label)), quiet_(quiet) {}
    void operator()(std::int64_t done, std::int64_t total) {
        if (quiet_) return;
        const int pct = static_cast<int>(100 * done / total);
        if (pct == last_ && done != total) return;
        last_ = pct;
        std::cerr << '\r' << label_ << ' ' << done << '/' << total << " (" << pct << "%)" << std::flush;
        if (done == total) std::cerr << '\n';
    }

private:
    std::string label_;
    bool quiet_;
    int last_ = -1;
};

// ---------------------------------------------------------------- sample

struct SampleArgs {
    int n = 3;
    std::string degrees = "2,2,2";
    std::int64_t count = 1;
    std::optional<std::uint64_t> seed;
    std::string out = "-";
};

int cmd_sample(const SampleArgs& a) {
    if (a.n < 1) throw UsageError("--n must be >= 1");
    if (a.count < 0) throw UsageError("--count must be >= 0");
    const auto degrees = checked_degrees(a.n, a.degrees);
    const std::uint64_t seed = resolve_seed(a.seed, std::nullopt);
    Output out(a.out);
    for (std::int64_t i = 0; i < a.count; ++i) {
        RngStream rng(seed, make_stream_id(StreamTag::system, static_cast<std::uint64_t>(i)));
        write_jsonl(out.stream(), sample_system(degrees, a.n, rng));
    }
    return kOk;
}

// ---------------------------------------------------------------- kappa

struct KappaArgs {
    std::string input = "-";
    std::string out = "-";
    std::string which = "both";
    int starts = 0;
    double tol = 1e-8;
    int max_iter = 200;
    std::optional<std::uint64_t> seed;
};

int cmd_kappa(const KappaArgs& a) {
    std::vector<PolySystem> systems;
    try {
        if (a.input == "-") {
            systems = read_jsonl(std::cin);
        } else {
            std::ifstream in(a.input);
            if (!in) throw UsageError("cannot read '" + a.input + "'");
            systems = read_jsonl(in);
        }
    } catch (const FormatError& e) {
        throw UsageError(a.input + ": " + e.what());
    }
    OptimizerOptions opt;
    opt.starts = a.starts;
    opt.tol = a.tol;
    opt.max_iter = a.max_iter;
    opt.seed = resolve_seed(a.seed, std::nullopt);

    Output out(a.out);
    auto& os = out.stream();
    os << "index,n,kappa_tilde,kappa,L_underline,kappa_lower,kappa_upper,sandwich_ok,converged,starts_used,error\n";
    for (std::size_t i = 0; i < systems.size(); ++i) {
        const PolySystem& f = systems[i];
        opt.stream_id = make_stream_id(StreamTag::optimizer_starts, i);
        ConditionReport r;
        std::string error;
        try {
            if (a.which == "both") r = condition_numbers(f, opt);
            else if (a.which == "tilde") r = kappa_tilde(f, opt);
            else r = kappa(f, opt);
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double sn = std::sqrt(static_cast<double>(f.n()));
        const double lo = r.kappa_tilde / sn, hi = std::sqrt(2.0) * sn * r.kappa_tilde;
        std::string sandwich;
        if (r.has_kappa() && r.has_kappa_tilde()) {
            const double slack = 1e-6;
            sandwich = (r.kappa >= lo * (1 - slack) && r.kappa <= hi * (1 + slack)) ? "1" : "0";
        }
        for (char& c : error)
            if (c == ',' || c == '\n') c = ';';
        os << i << ',' << f.n() << ',' << format_double(r.kappa_tilde) << ',' << format_double(r.kappa) << ','
           << format_double(r.L_underline) << ',' << format_double(lo) << ',' << format_double(hi) << ',' << sandwich
           << ',' << (error.empty() && r.converged ? 1 : 0) << ',' << r.starts_used << ',' << error << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------- experiments

struct ExperimentArgs {
    std::string config_path;
    std::optional<int> n;
    std::optional<std::string> degrees;
    std::optional<std::int64_t> replicates;
    std::optional<std::uint64_t> seed;
    std::optional<int> starts;
    std::optional<double> tol;
    std::optional<int> max_iter;
    std::optional<double> fd_step;
    std::optional<int> jobs;
    std::optional<std::string> output_dir;
    bool with_kappa = false;
    std::string out;
    bool quiet = false;
};

ExperimentConfig effective_config(const std::string& experiment, const ExperimentArgs& a) {
    ExperimentConfig cfg;
    std::optional<std::uint64_t> config_seed;
    if (!a.config_path.empty()) {
        try {
            const auto parsed = load_config(a.config_path);
            cfg = parsed.config;
            if (parsed.keys.count("seed")) config_seed = cfg.seed;
            if (parsed.keys.count("experiment") && cfg.experiment != experiment)
                throw UsageError("config names experiment '" + cfg.experiment + "' but the subcommand is '" +
                                 experiment + "'");
        } catch (const ConfigError& e) {
            throw UsageError(a.config_path + ": " + e.what());
        }
    }
    cfg.experiment = experiment;
    if (a.n) cfg.n = *a.n;
    if (a.degrees) cfg.degrees = checked_degrees(cfg.n, *a.degrees);
    if (a.replicates) cfg.replicates = *a.replicates;
    if (a.starts) cfg.optimizer.starts = *a.starts;
    if (a.tol) cfg.optimizer.tol = *a.tol;
    if (a.max_iter) cfg.optimizer.max_iter = *a.max_iter;
    if (a.fd_step) cfg.optimizer.fd_step = *a.fd_step;
    if (a.jobs) cfg.jobs = *a.jobs;
    if (a.output_dir) cfg.output_dir = *a.output_dir;
    if (a.with_kappa) cfg.with_kappa = true;
    cfg.seed = resolve_seed(a.seed, config_seed);
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

int cmd_experiment(const std::string& experiment, const ExperimentArgs& a) {
    const ExperimentConfig cfg = effective_config(experiment, a);
    if (!cfg.in_theorem_scope())
        std::cerr << "note: n = " << cfg.n << " is outside the range where the bounds are proved; reported only\n";
    Progress progress(experiment, a.quiet);
    RunManifest m;
    try {
        m = run_experiment(cfg, std::ref(progress));
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto paths = experiment_paths(cfg);
    if (a.out == "-") write_csv(std::cout, m.records);
    else if (!a.out.empty()) write_csv(Output(a.out).stream(), m.records);
    std::cerr << "wrote " << paths.csv.string() << " and " << paths.manifest.string() << " in "
              << std::setprecision(3) << m.wall_clock_seconds << " s\n";
    const auto& failures = m.results["failures"];
    for (const auto& f : failures) std::cerr << "FAIL " << f.get<std::string>() << '\n';
    return failures.empty() ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, std::int64_t trials, std::optional<std::uint64_t> seed_flag,
               const std::string& json_path) {
    const std::uint64_t seed = resolve_seed(seed_flag, std::nullopt);
    const CheckList checks = run_verify_suite(suite, trials, seed);
    // the table goes to stderr when stdout carries the JSON
    print_checks(json_path == "-" ? std::cerr : std::cout, checks);
    if (!json_path.empty()) Output(json_path).stream() << to_json(checks).dump(2) << '\n';
    return all_passed(checks) ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------- report

void print_tail(std::ostream& os, const nlohmann::json& rows, const char* what) {
    os << "  P(" << what << " > a)\n";
    os << "    " << std::setw(10) << "a" << std::setw(13) << "empirical" << std::setw(11) << "se" << std::setw(13)
       << "bound" << "  note\n";
    for (const auto& r : rows) {
        std::string note = r["in_regime"].get<bool>() ? "" : "below threshold";
        if (r["vacuous"].get<bool>()) note += note.empty() ? "vacuous" : ", vacuous";
        if (r["violated"].get<bool>()) note += " VIOLATED";
        os << "    " << std::setw(10) << r["a"].get<double>() << std::setw(13) << r["empirical"]["p"].get<double>()
           << std::setw(11) << r["empirical"]["se"].get<double>() << std::setw(13) << r["bound"].get<double>() << "  " << note << '\n';
    }
}

int cmd_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read '" + path + "'");
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(path + ": " + e.what());
    }
    auto& os = std::cout;
    const auto& c = m["config"];
    os << "experiment " << c["experiment"].get<std::string>() << ", n = " << c["n"] << ", degrees "
       << c["degrees"].dump() << ", " << c["replicates"] << " replicates, seed " << c["seed"] << '\n';
    os << "status " << m["status"].get<std::string>() << ", code " << m["code_version"].get<std::string>() << ", "
       << m["wall_clock_seconds"] << " s\n";
    if (m["status"] != "complete") return kOk;
    const auto& r = m["results"];
    const auto& k = m["constants"];
    os << "constants: K = " << k["K"] << ", tail threshold a > " << k["a_threshold"] << '\n';
    if (!r["in_theorem_scope"].get<bool>()) os << "n < 3: bounds reported for reference only\n";
    os << "failed replicates " << r["failed_replicates"] << ", unconverged " << r["unconverged_replicates"] << '\n';
    if (r.contains("tail")) print_tail(os, r["tail"], "kappa_tilde");
    if (r.contains("slope"))
        os << "  log-log slope over the top decade: " << r["slope"]["slope"] << " (se " << r["slope"]["slope_se"]
           << ", " << r["slope"]["points"] << " points)\n";
    if (r.contains("expectation"))
        os << "  E ln kappa_tilde = " << r["expectation"]["mean_ln"] << " +- " << r["expectation"]["se"] << ", bound "
           << r["expectation"]["bound"] << '\n';
    if (r.contains("density")) {
        os << "  P(L_underline < alpha)\n";
        for (const auto& row : r["density"])
            os << "    alpha " << row["alpha"] << ": " << row["empirical"]["p"] << " +- " << row["empirical"]["se"] << ", bound " << row["bound"]
               << '\n';
    }
    if (r.contains("weyl")) {
        const auto& w = r["weyl"];
        os << "  mean ||f||^2 = " << w["mean"] << " +- " << w["mean_se"] << " (N = " << w["dim"] << "), variance "
           << w["variance"] << '\n';
        for (const auto& row : w["rows"])
            os << "    eta " << row["eta"] << ": " << row["empirical"]["p"] << ", bound " << row["bound"] << '\n';
    }
    if (r.contains("kappa_tail")) print_tail(os, r["kappa_tail"], "kappa");
    if (r.contains("kappa_expectation"))
        os << "  E ln kappa = " << r["kappa_expectation"]["mean_ln"] << " +- " << r["kappa_expectation"]["se"]
           << ", bound " << r["kappa_expectation"]["bound"] << '\n';
    if (r.contains("sandwich"))
        os << "  sandwich: " << r["sandwich"]["violations"] << " violations in " << r["sandwich"]["checked"] << '\n';
    const auto& f = r["failures"];
    if (f.empty()) os << "all bound checks passed\n";
    for (const auto& x : f) os << "FAIL " << x.get<std::string>() << '\n';
    return f.empty() ? kOk : kCheckFailed;
}

void add_experiment_options(CLI::App* sub, ExperimentArgs& a) {
    sub->add_option("--config", a.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--n", a.n, "number of polynomials");
    sub->add_option("--degrees", a.degrees, "comma-separated degrees");
    sub->add_option("--replicates", a.replicates);
    sub->add_option("--seed", a.seed, "overrides POLYCOND_SEED and the config file");
    sub->add_option("--starts", a.starts, "optimizer starts per system, 0 for the default");
    sub->add_option("--tol", a.tol);
    sub->add_option("--max-iter", a.max_iter);
    sub->add_option("--fd-step", a.fd_step);
    sub->add_option("--jobs", a.jobs, "worker threads, 0 for all cores");
    sub->add_option("--output-dir", a.output_dir, "where the CSV and manifest go");
    sub->add_flag("--with-kappa", a.with_kappa, "also compute kappa for every replicate");
    sub->add_option("--out", a.out, "extra copy of the CSV; '-' for stdout");
    sub->add_flag("--quiet", a.quiet, "no progress on stderr");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Condition numbers of random polynomial systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", POLYCOND_VERSION);

    SampleArgs sa;
    auto* sample = app.add_subcommand("sample", "write random systems as JSONL");
    sample->add_option("--n", sa.n);
    sample->add_option("--degrees", sa.degrees);
    sample->add_option("--count", sa.count);
    sample->add_option("--seed", sa.seed);
    sample->add_option("--out", sa.out, "'-' for stdout");

    KappaArgs ka;
    auto* kap = app.add_subcommand("kappa", "condition numbers of systems read as JSONL");
    kap->add_option("--input", ka.input, "'-' for stdin");
    kap->add_option("--out", ka.out);
    kap->add_option("--which", ka.which)->check(CLI::IsMember({"kappa", "tilde", "both"}));
    kap->add_option("--starts", ka.starts);
    kap->add_option("--tol", ka.tol);
    kap->add_option("--max-iter", ka.max_iter);
    kap->add_option("--seed", ka.seed);

    std::vector<std::pair<std::string, ExperimentArgs>> experiments{
        {"tail", {}}, {"expectation", {}}, {"density", {}}, {"weyl", {}}};
    std::vector<CLI::App*> exp_cmds;
    for (auto& [name, args] : experiments) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        add_experiment_options(sub, args);
        exp_cmds.push_back(sub);
    }

    std::string suite = "all", json_path;
    std::int64_t trials = 0;
    std::optional<std::uint64_t> vseed;
    auto* ver = app.add_subcommand("verify", "run verification suites");
    ver->add_option("--suite", suite)->check(CLI::IsMember(verify_suite_names()));
    ver->add_option("--trials", trials, "0 picks each suite's default");
    ver->add_option("--seed", vseed);
    ver->add_option("--json", json_path, "also write the table as JSON; '-' for stdout");

    std::string manifest;
    auto* rep = app.add_subcommand("report", "summarize a run manifest");
    rep->add_option("manifest", manifest)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*sample) return cmd_sample(sa);
        if (*kap) return cmd_kappa(ka);
        for (std::size_t i = 0; i < exp_cmds.size(); ++i)
            if (*exp_cmds[i]) return cmd_experiment(experiments[i].first, experiments[i].second);
        if (*ver) return cmd_verify(suite, trials, vseed, json_path);
        if (*rep) return cmd_report(manifest);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kCheckFailed;
    }
    return kUsage;
}
