#include "bdsde/experiment.hpp"

#include "bdsde/error.hpp"
#include "bdsde/hash.hpp"
#include "bdsde/linear_engine.hpp"
#include "bdsde/lsmc.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/verifiers.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace bdsde {

namespace {

constexpr const char* kLabVersion = "0.1.0";

std::map<std::string, std::string> versions() {
    std::map<std::string, std::string> v;
    v["db_lab"] = kLabVersion;
    v["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                 "." + std::to_string(EIGEN_MINOR_VERSION);
    v["compiler"] = __VERSION__;
#ifdef _OPENMP
    v["openmp"] = std::to_string(_OPENMP);
#endif
    return v;
}

/// Row-oriented CSV writer with 17-digit numbers.
class Csv {
public:
    Csv(const std::filesystem::path& path, const std::string& header) : out_(path) {
        if (!out_) {
            throw ResourceError("cannot open " + path.string());
        }
        out_ << header << '\n';
    }

    template <class... Cells>
    void row(const Cells&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }

private:
    static std::string cell(double v) { return fmt17(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    static std::string cell(const char* v) { return v; }

    std::ofstream out_;
};

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = i + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

TerminalFamily shifted_terminal(const TerminalFamily& base, double shift) {
    TerminalFamily t = base;
    t.name = base.name + "+" + fmt17(shift);
    const TerminalFn psi = base.psi;
    t.psi = [psi, shift](double x, double w) { return psi(x, w) + shift; };
    return t;
}

struct Context {
    const ExperimentConfig& cfg;
    const std::filesystem::path& dir;
    const DriverPaths& paths;
    Preset problem;
    SchemeConfig scheme;
};

using Runner = std::function<void(Context&, CheckOutcome&)>;

void skip(CheckOutcome& out, const std::string& why) {
    out.status = CheckStatus::Skipped;
    out.message = why;
}

bool is_pure(const Preset& p) { return !p.forward; }

void run_solve(Context& c, CheckOutcome& out) {
    BdsdeProblem problem{c.problem.driver, c.problem.loading, c.problem.terminal,
                         c.problem.forward, c.cfg.x, c.cfg.t_index, c.problem.card};
    SchemeConfig scheme = c.scheme;
    scheme.keep_paths = false;
    const BackwardSolution sol = solve_bdsde_lsmc(c.paths, problem, scheme);
    const std::size_t n = c.paths.steps();
    {
        Csv csv(c.dir / "solve.csv", "node,t,y_mean,y_se,z_mean,z_se");
        for (std::size_t i = 0; i <= n; ++i) {
            const std::string zm = i < n ? fmt17(sol.z_pooled[i].mean) : "";
            const std::string zs = i < n ? fmt17(sol.z_pooled[i].se) : "";
            csv.row(i, c.paths.grid.node(i), sol.y_pooled[i].mean, sol.y_pooled[i].se, zm, zs);
        }
    }
    {
        Csv csv(c.dir / "solve_paths.csv", "b_path,y,y_se");
        const auto y = sol.y_at(c.cfg.t_index);
        const auto se = sol.y_se_at(c.cfg.t_index);
        for (std::size_t b = 0; b < y.size(); ++b) {
            csv.row(b, y[b], se[b]);
        }
    }
    out.files = {"solve.csv", "solve_paths.csv"};
    out.metrics = {{"y_mean", sol.y_pooled[c.cfg.t_index].mean},
                   {"y_se", sol.y_pooled[c.cfg.t_index].se}};
    out.status = CheckStatus::Pass;
}

void run_comparison(Context& c, CheckOutcome& out) {
    if (!is_pure(c.problem)) {
        return skip(out, "needs a problem without forward leg");
    }
    const BdsdeProblem lo{c.problem.driver, c.problem.loading, c.problem.terminal, std::nullopt,
                          c.cfg.x, c.cfg.t_index, std::nullopt};
    BdsdeProblem hi = lo;
    hi.terminal = shifted_terminal(c.problem.terminal, c.cfg.shift);
    const ComparisonReport r = comparison_check(hi, lo, c.paths, c.problem.card, c.scheme);
    Csv csv(c.dir / "comparison.csv", "b_path,difference,difference_se");
    for (std::size_t b = 0; b < r.differences.size(); ++b) {
        csv.row(b, r.differences[b], r.difference_se[b]);
    }
    out.files = {"comparison.csv"};
    out.metrics = {{"pass_fraction", r.pass_fraction}, {"equal_fraction", r.equal_fraction},
                   {"eps", r.eps},
                   {"proof_bound", r.proof_bound},
                   {"margin", r.margin}};
    out.status = r.pass_fraction >= c.cfg.pass_fraction ? CheckStatus::Pass : CheckStatus::Fail;
}

void write_rows(const std::filesystem::path& file, const HomeoReport& r) {
    Csv csv(file, "t_index,x,pooled_mean,pooled_se,violations");
    for (std::size_t ti = 0; ti < r.t_indices.size(); ++ti) {
        std::size_t v = 0;
        for (std::size_t n : r.violations[ti]) {
            v += n;
        }
        for (std::size_t k = 0; k < r.xs.size(); ++k) {
            csv.row(r.t_indices[ti], r.xs[k], r.pooled[ti][k], r.pooled_se[ti][k],
                    k == 0 ? std::to_string(v) : std::string());
        }
    }
}

void run_monotonicity(Context& c, CheckOutcome& out) {
    if (!is_pure(c.problem)) {
        return skip(out, "needs a problem without forward leg");
    }
    if (c.problem.terminal.monotone == Monotone::None) {
        return skip(out, "terminal family is not monotone");
    }
    const FlowSpec flow{c.problem.driver, c.problem.loading, c.problem.terminal};
    const HomeoReport r = monotonicity_scan(flow, linspace(c.cfg.x_lo, c.cfg.x_hi, c.cfg.x_points),
                                            c.paths, {c.cfg.t_index}, c.scheme);
    const auto& row = r.pooled[0];
    const double lo = *std::min_element(row.begin(), row.end());
    const double hi = *std::max_element(row.begin(), row.end());
    const auto inv = inverse_probe(r, 0.5 * (lo + hi));
    write_rows(c.dir / "monotonicity.csv", r);
    out.files = {"monotonicity.csv"};
    out.metrics = {{"violation_fraction", r.violation_fraction},
                   {"range", hi - lo},
                   {"inverse_x", inv.x_hat},
                   {"inverse_residual", inv.residual}};
    const bool inverse_ok = inv.status == HomeoReport::Inverse::Status::Ok &&
                            inv.residual <= 1e-3 * (hi - lo);
    out.status = r.violation_fraction <= c.cfg.max_violation_fraction && inverse_ok
                     ? CheckStatus::Pass
                     : CheckStatus::Fail;
}

void run_sandwich(Context& c, CheckOutcome& out) {
    if (!is_pure(c.problem)) {
        return skip(out, "needs a problem without forward leg");
    }
    if (!c.problem.card.claims.bounded_f0) {
        return skip(out, "card declares no C_0");
    }
    if (!c.problem.loading.spatially_constant) {
        return skip(out, "loading is not spatially constant");
    }
    const FlowSpec flow{c.problem.driver, c.problem.loading, c.problem.terminal};
    const HomeoReport r = sandwich_check(flow, c.paths, c.problem.card, c.cfg.t_index, c.cfg.x,
                                         c.cfg.far_xs, c.cfg.eps0, c.scheme);
    const auto& e = *r.envelope;
    {
        Csv csv(c.dir / "sandwich.csv", "b_path,y_tilde,y,y_hat");
        for (std::size_t b = 0; b < e.y.size(); ++b) {
            csv.row(b, e.y_tilde[b], e.y[b], e.y_hat[b]);
        }
    }
    {
        Csv csv(c.dir / "sandwich_far.csv", "x,fraction");
        for (std::size_t k = 0; k < e.far_xs.size(); ++k) {
            csv.row(e.far_xs[k], e.far_fractions[k]);
        }
    }
    out.files = {"sandwich.csv", "sandwich_far.csv"};
    out.metrics = {{"sandwich_fraction", e.sandwich_fraction},
                   {"threshold_M", e.threshold_M},
                   {"eps0", e.eps0},
                   {"escape_fraction", e.escape_fraction}};
    out.status = e.sandwich_fraction >= c.cfg.pass_fraction &&
                         e.escape_fraction >= c.cfg.pass_fraction
                     ? CheckStatus::Pass
                     : CheckStatus::Fail;
}

void write_moments(const std::filesystem::path& file, const char* first, const MomentReport& r) {
    Csv csv(file, std::string(first) + ",estimate,se");
    for (std::size_t k = 0; k < r.estimates.size(); ++k) {
        csv.row(r.abscissa[k], r.estimates[k], r.se[k]);
    }
}

void run_holder(Context& c, CheckOutcome& out) {
    if (!is_pure(c.problem)) {
        return skip(out, "needs a problem without forward leg");
    }
    std::vector<PairSpec> pairs;
    for (double h : {0.5, 0.25, 0.125, 0.0625}) {
        pairs.push_back({c.cfg.x, c.cfg.x + h});
    }
    const MomentReport r =
        holder_moment_estimate({c.problem.driver, c.problem.loading, c.problem.terminal}, pairs,
                               c.paths, std::abs(c.cfg.x) + 1.0, c.scheme);
    write_moments(c.dir / "holder.csv", "distance", r);
    out.files = {"holder.csv"};
    out.metrics = {{"slope", r.fit.slope}, {"r_squared", r.fit.r_squared}};
    out.status = r.fit_valid && r.fit.slope >= c.cfg.min_slope &&
                         r.fit.r_squared >= c.cfg.min_r_squared
                     ? CheckStatus::Pass
                     : CheckStatus::Fail;
}

void run_negative_moment(Context& c, CheckOutcome& out) {
    if (!is_pure(c.problem)) {
        return skip(out, "needs a problem without forward leg");
    }
    if (!c.problem.loading.is_zero) {
        return skip(out, "needs a zero noise loading");
    }
    std::optional<AssumptionCard> card;
    if (c.problem.card.claims.negative_moment) {
        card = c.problem.card;
    }
    const MomentReport r = negative_moment_decay(
        {c.problem.driver, c.problem.loading, c.problem.terminal}, {2.0, 4.0, 8.0, 16.0},
        c.problem.card.beta, c.paths, card, c.scheme);
    write_moments(c.dir / "negative_moment.csv", "x", r);
    out.files = {"negative_moment.csv"};
    out.metrics = {{"non_increasing", r.non_increasing ? 1.0 : 0.0}, {"slope", r.fit.slope}};
    out.status = r.non_increasing ? CheckStatus::Pass : CheckStatus::Fail;
}

void run_forward_moment(Context& c, CheckOutcome& out) {
    if (!c.problem.forward) {
        return skip(out, "needs a forward leg");
    }
    std::optional<AssumptionCard> card;
    if (c.problem.card.claims.forward_growth) {
        card = c.problem.card;
    }
    const MomentReport r = forward_moment_check(*c.problem.forward, c.cfg.moment_beta,
                                                {2.0, 4.0, 8.0}, c.paths, 0, c.paths.steps(), card);
    {
        Csv csv(c.dir / "forward_moment.csv", "x,estimate,se,ratio,ratio_se");
        for (std::size_t k = 0; k < r.estimates.size(); ++k) {
            csv.row(r.abscissa[k], r.estimates[k], r.se[k], r.ratios[k], r.ratio_se[k]);
        }
    }
    out.files = {"forward_moment.csv"};
    out.metrics = {{"empirical_C", r.empirical_C}};
    out.status = std::isfinite(r.empirical_C) ? CheckStatus::Pass : CheckStatus::Fail;
}

void run_field(Context& c, CheckOutcome& out) {
    if (!c.problem.forward) {
        return skip(out, "needs a forward leg");
    }
    if (c.problem.forward->h_monotone == Monotone::None) {
        return skip(out, "terminal function h is not monotone");
    }
    BdsdeProblem problem{c.problem.driver, c.problem.loading, c.problem.terminal,
                         c.problem.forward, c.cfg.x, 0, std::nullopt};
    const FieldReport field =
        spde_field({0, c.paths.steps() / 2}, linspace(c.cfg.x_lo, c.cfg.x_hi, c.cfg.x_points),
                   problem, c.scheme, c.paths);
    const HomeoReport r = field_monotonicity(field);
    write_rows(c.dir / "field.csv", r);
    out.files = {"field.csv"};
    out.metrics = {{"violation_fraction", r.violation_fraction}};
    out.status = r.violation_fraction <= c.cfg.max_violation_fraction ? CheckStatus::Pass
                                                                       : CheckStatus::Fail;
}

Runner runner_for(Check c) {
    switch (c) {
    case Check::Solve: return run_solve;
    case Check::Comparison: return run_comparison;
    case Check::Monotonicity: return run_monotonicity;
    case Check::Sandwich: return run_sandwich;
    case Check::Holder: return run_holder;
    case Check::NegativeMoment: return run_negative_moment;
    case Check::ForwardMoment: return run_forward_moment;
    case Check::Field: return run_field;
    }
    return {};
}

std::string checksum(const double* data, std::size_t n) {
    return hex64(fnv1a(std::string_view(reinterpret_cast<const char*>(data), n * sizeof(double))));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

const char* status_name(CheckStatus s) {
    switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Skipped: return "skipped";
    case CheckStatus::Error: return "error";
    }
    return "?";
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["config"] = config_echo;
    j["versions"] = versions;
    j["threads"] = threads;
    j["wall_clock_seconds"] = wall_clock_seconds;
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
        nlohmann::ordered_json cj;
        cj["name"] = c.name;
        cj["status"] = status_name(c.status);
        cj["pass"] = c.status == CheckStatus::Pass;
        nlohmann::ordered_json m = nlohmann::ordered_json::object();
        for (const auto& [k, v] : c.metrics) {
            m[k] = std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(fmt17(v));
        }
        cj["metrics"] = m;
        cj["files"] = c.files;
        if (!c.message.empty()) {
            cj["message"] = c.message;
        }
        j["checks"].push_back(cj);
    }
    j["exit_status"] = exit_status;
    return j.dump(2) + "\n";
}

RunManifest run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);
    RunManifest m;
    m.config_echo = config.echo();
    m.config_hash = config.hash();
    m.seed = config.seed;
    m.versions = versions();
    m.threads = thread_count();

    auto finish = [&]() {
        m.wall_clock_seconds = seconds_since(t0);
        {
            Csv csv(out_dir / "summary.csv", "check,status,metric,value");
            for (const auto& c : m.checks) {
                if (c.metrics.empty()) {
                    csv.row(c.name, status_name(c.status), "", "");
                }
                for (const auto& [k, v] : c.metrics) {
                    csv.row(c.name, status_name(c.status), k, v);
                }
            }
        }
        std::ofstream(out_dir / "manifest.json") << m.to_json();
        return m;
    };

    try {
        const DriverPaths paths = sample_driver_paths(make_grid(config.T, config.N), config.M_W,
                                                      config.M_B, RngSpec{config.seed});
        SchemeConfig scheme;
        scheme.basis = config.basis;
        Context ctx{config, out_dir, paths, config.resolved_problem(), scheme};
        for (Check check : config.checks) {
            CheckOutcome out;
            out.name = check_name(check);
            try {
                runner_for(check)(ctx, out);
            } catch (const std::exception& e) {
                out.status = CheckStatus::Error;
                out.message = e.what();
                m.checks.push_back(out);
                m.exit_status = 2;
                return finish();
            }
            if (out.status == CheckStatus::Fail) {
                m.exit_status = std::max(m.exit_status, 1);
            }
            m.checks.push_back(out);
        }
    } catch (const std::exception& e) {
        CheckOutcome out{"setup", CheckStatus::Error, {}, {}, e.what()};
        m.checks.push_back(out);
        m.exit_status = 2;
    }
    return finish();
}

std::string BenchReport::to_json() const {
    nlohmann::ordered_json j;
    j["config_hash"] = config_hash;
    j["threads"] = threads;
    j["kernels"] = nlohmann::ordered_json::array();
    for (const auto& k : kernels) {
        j["kernels"].push_back({{"kernel", k.kernel},
                                {"repetitions", k.repetitions},
                                {"median_seconds", k.median_seconds},
                                {"throughput_path_steps_per_second", k.throughput},
                                {"checksum", k.checksum},
                                {"matches_reference", k.matches_reference}});
    }
    return j.dump(2) + "\n";
}

BenchReport bench_kernel(const ExperimentConfig& config, std::size_t repetitions) {
    repetitions = std::max<std::size_t>(repetitions, 5);
    const TimeGrid grid = make_grid(config.T, config.N);
    const RngSpec rng{config.seed};
    BenchReport report;
    report.config_hash = config.hash();
    report.threads = thread_count();

    auto time_kernel = [&](const std::string& name, double work,
                           const std::function<std::string()>& kernel) {
        const std::string reference = kernel();
        std::vector<double> times;
        bool same = true;
        for (std::size_t r = 0; r < repetitions; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const std::string sum = kernel();
            times.push_back(seconds_since(t0));
            same = same && sum == reference;
        }
        std::sort(times.begin(), times.end());
        const double median = times.size() % 2 == 1
                                  ? times[times.size() / 2]
                                  : 0.5 * (times[times.size() / 2 - 1] + times[times.size() / 2]);
        report.kernels.push_back(
            {name, repetitions, median, median > 0.0 ? work / median : 0.0, reference, same});
    };

    const double n = static_cast<double>(config.N);
    time_kernel("generation", static_cast<double>(config.M_W + config.M_B) * n, [&] {
        const DriverPaths p = sample_driver_paths(grid, config.M_W, config.M_B, rng);
        return checksum(p.dW.data(), static_cast<std::size_t>(p.dW.size())) +
               checksum(p.dB.data(), static_cast<std::size_t>(p.dB.size()));
    });

    const DriverPaths paths = sample_driver_paths(grid, config.M_W, config.M_B, rng);
    const double pair_work = static_cast<double>(config.M_W * config.M_B) * n;
    time_kernel("q_factor", pair_work, [&] {
        const auto spec = LinearBDSDESpec::constant(grid, -0.5, 0.5, 0.3);
        const QFactor q = q_factor(spec, paths, 0, grid.steps());
        return checksum(q.values.data(), static_cast<std::size_t>(q.values.size()));
    });

    const Preset problem = config.resolved_problem();
    SchemeConfig scheme;
    scheme.basis = config.basis;
    scheme.keep_paths = false;
    time_kernel("lsmc_sweep", pair_work, [&] {
        const BackwardSolution sol = solve_bdsde_lsmc(
            paths, {problem.driver, problem.loading, problem.terminal, problem.forward, config.x,
                    config.t_index, std::nullopt},
            scheme);
        return checksum(sol.y_mean.data(), static_cast<std::size_t>(sol.y_mean.size()));
    });
    return report;
}

} // namespace bdsde
