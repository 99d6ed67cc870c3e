// Desk-scale acceptance run: T = 1, N = 32, M_W = 8192, M_B = 64, seed 42.
// Prints one PASS/FAIL line per criterion and exits nonzero if any fails.

#include "bdsde/experiment.hpp"
#include "bdsde/linear_engine.hpp"
#include "bdsde/lsmc.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/verifiers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace bdsde;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;
constexpr long long kSteps = 32;
constexpr std::size_t kW = 8192;
constexpr std::size_t kB = 64;

const DriverPaths& desk_paths() {
    static const DriverPaths p = sample_driver_paths(make_grid(1.0, kSteps), kW, kB, RngSpec{kSeed});
    return p;
}

BdsdeProblem pure(const DriverSpec& f, const NoiseLoadingSpec& a, const TerminalFamily& xi,
                  double x) {
    return {f, a, xi, std::nullopt, x, 0, std::nullopt};
}

BdsdeProblem coupled(const Preset& p, double x) {
    return {p.driver, p.loading, p.terminal, p.forward, x, 0, std::nullopt};
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

struct Result {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void linear_oracle(Result& r) {
    const DriverPaths& p = desk_paths();
    const Preset& pre = lookup_preset("linear_decay");
    const BackwardSolution sol = solve_bdsde_lsmc(p, pure(pre.driver, pre.loading, pre.terminal, 0.0));
    auto spec = LinearBDSDESpec::constant(p.grid, -0.5, 0.0, 0.3);
    spec.terminal_values.assign(kW, 1.0);
    const LinearSolution lin = explicit_linear_solution(spec, p, 0);
    const double diff = std::abs(sol.y_pooled[0].mean - lin.pooled.mean);
    const double tol = std::max(3.0 * std::hypot(sol.y_pooled[0].se, lin.pooled.se), 0.02);
    std::size_t agree = 0;
    for (std::size_t b = 0; b < kB; ++b) {
        const double d = std::abs(sol.y_mean(static_cast<Eigen::Index>(b), 0) - lin.per_b[b]);
        const double t = std::max(
            3.0 * std::hypot(sol.y_se(static_cast<Eigen::Index>(b), 0), lin.per_b_se[b]), 0.02);
        agree += d <= t ? 1 : 0;
    }
    const double frac = static_cast<double>(agree) / kB;
    r.detail << "pooled LSMC " << g(sol.y_pooled[0].mean) << " vs explicit " << g(lin.pooled.mean)
             << " (|diff| " << g(diff) << ", tol " << g(tol) << "); per-B agreement " << g(frac);
    r.require(diff <= tol, "pooled difference");
    r.require(frac >= 0.95, "per-B agreement");
}

void q_bounds(Result& r) {
    const DriverPaths& p = desk_paths();
    auto spec = LinearBDSDESpec::constant(p.grid, 0.0, 0.5, 0.3);
    spec.bound_f = 0.5;
    spec.bound_g = 0.3;
    const QBoundReport q = q_conditional_bounds_check(spec, p, 0, p.steps());
    const double z = std::abs(q.pooled.mean - 1.0) / q.pooled.se;
    r.detail << "inside [" << g(q.lower) << ", " << g(q.upper) << "] for " << g(q.inside_fraction)
             << " of B-paths; pooled " << g(q.pooled.mean) << " (" << g(z) << " SE from 1)";
    r.require(q.inside_fraction >= 0.99, "inside fraction");
    r.require(z <= 3.0, "pooled unit mean");
}

void comparison(Result& r) {
    const DriverPaths& p = desk_paths();
    const ComparisonReport shift =
        comparison_check(pure(zero_driver(), zero_loading(), shift_terminal(1.0), 0.0),
                         pure(zero_driver(), zero_loading(), identity_terminal(), 0.0), p,
                         lookup_preset("zero").card);
    bool exact = true;
    for (double d : shift.differences) {
        exact = exact && d == 1.0;
    }
    const Preset& pre = lookup_preset("paper_arctan");
    const ComparisonReport arctan =
        comparison_check(pure(pre.driver, pre.loading, shift_terminal(1.0), 0.0),
                         pure(pre.driver, pre.loading, identity_terminal(), 0.0), p, pre.card);
    r.detail << "shift pair exact " << (exact ? "yes" : "no") << "; arctan Y1 > Y2 fraction "
             << g(arctan.pass_fraction) << " (min margin over proof bound " << g(arctan.margin)
             << ")";
    r.require(exact, "additive shift");
    r.require(arctan.pass_fraction >= 0.99, "arctan fraction");
}

void homeomorphism(Result& r) {
    const DriverPaths& p = desk_paths();
    const Preset& pre = lookup_preset("paper_arctan");
    const auto xs = linspace(-2.0, 2.0, 21);
    const HomeoReport scan = monotonicity_scan({pre.driver, pre.loading, pre.terminal}, xs, p, {0});
    const auto& row = scan.pooled[0];
    const double range = row.back() - row.front();
    const auto inv = inverse_probe(scan, 0.5 * (row.front() + row.back()));
    const HomeoReport id =
        monotonicity_scan({zero_driver(), zero_loading(), identity_terminal()}, xs, p, {0});
    const HomeoReport cube =
        monotonicity_scan({zero_driver(), zero_loading(), cubic_terminal()}, xs, p, {0});
    r.detail << "arctan violation fraction " << g(scan.violation_fraction) << "; inverse residual "
             << g(inv.residual) << " (range " << g(range) << "); identity/cubic violations "
             << id.violation_total << "/" << cube.violation_total;
    r.require(scan.violation_fraction <= 0.01, "violation fraction");
    r.require(inv.status == HomeoReport::Inverse::Status::Ok && inv.residual <= 1e-3 * range,
              "inverse probe");
    r.require(id.violation_total == 0 && cube.violation_total == 0, "trivial flows");
}

void holder(Result& r) {
    const DriverPaths& p = desk_paths();
    const std::vector<PairSpec> pairs{{0.0, 0.5}, {0.0, 0.25}, {0.0, 0.125}, {0.0, 0.0625}};
    const Preset& pre = lookup_preset("paper_arctan");
    const MomentReport arctan =
        holder_moment_estimate({pre.driver, pre.loading, pre.terminal}, pairs, p, 1.0);
    const MomentReport exact =
        holder_moment_estimate({zero_driver(), zero_loading(), identity_terminal()}, pairs, p, 1.0);
    r.detail << "arctan slope " << g(arctan.fit.slope) << " R^2 " << g(arctan.fit.r_squared)
             << "; identity slope " << std::to_string(exact.fit.slope);
    r.require(arctan.fit_valid && arctan.fit.slope >= 1.0 && arctan.fit.r_squared >= 0.99,
              "arctan fit");
    r.require(exact.fit_valid && std::abs(exact.fit.slope - 2.0) <= 1e-12, "exact slope");
}

void negative_moment(Result& r) {
    const DriverPaths& p = desk_paths();
    const std::vector<double> xs{2.0, 4.0, 8.0, 16.0};
    const MomentReport arctan =
        negative_moment_decay({arctan_driver(), zero_loading(), identity_terminal()}, xs, -0.25, p,
                              lookup_preset("paper_arctan").card);
    const MomentReport exact =
        negative_moment_decay({zero_driver(), zero_loading(), identity_terminal()}, xs, -0.25, p);
    bool powers = true;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        powers = powers && exact.estimates[k] == 1.0 / xs[k];
    }
    r.detail << "arctan estimates";
    for (double e : arctan.estimates) {
        r.detail << " " << g(e);
    }
    r.detail << "; trivial case exact " << (powers ? "yes" : "no");
    r.require(arctan.non_increasing, "non-increasing");
    r.require(powers, "exact powers");
}

void sandwich(Result& r) {
    const DriverPaths& p = desk_paths();
    const Preset& pre = lookup_preset("paper_arctan");
    const FlowSpec flow{pre.driver, pre.loading, pre.terminal};
    // Any eps0 in (0, eps) is admissible; containment of the plus envelope
    // needs eps0 <= eps e^{-2 C_f T}, so take half of that.
    const double eps0 = pre.card.eps * std::exp(-2.0 * pre.card.C_f) / 2.0;
    const std::vector<double> far{-16.0, -8.0, -4.0, 4.0, 8.0, 16.0};
    double sandwich_min = 1.0;
    for (double x : {-2.0, 0.0, 2.0}) {
        const HomeoReport h = sandwich_check(flow, p, pre.card, 0, x);
        sandwich_min = std::min(sandwich_min, h.envelope->sandwich_fraction);
    }
    const HomeoReport env = sandwich_check(flow, p, pre.card, 0, 2.0, far, eps0);
    const HomeoReport dflt = sandwich_check(flow, p, pre.card, 0, 2.0, far);
    r.detail << "sandwich fraction " << g(sandwich_min) << "; M " << g(env.envelope->threshold_M)
             << ", containment beyond M " << g(env.envelope->escape_fraction) << " at eps0 "
             << g(eps0) << " (eps0 = eps/2 gives " << g(dflt.envelope->escape_fraction) << ")";
    r.require(sandwich_min >= 0.99, "sandwich");
    r.require(!env.envelope->far_xs.empty() && env.envelope->escape_fraction >= 0.99,
              "envelope containment");
}

void feynman_kac(Result& r) {
    const DriverPaths& p = desk_paths();
    SchemeConfig scheme;
    const Preset& heat = lookup_preset("heat");
    const FieldReport hf = spde_field({0}, {0.0}, coupled(heat, 0.0), scheme, p);
    const double heat_z = std::abs(hf.at(0, 0).pooled.mean - 2.0) / hf.at(0, 0).pooled.se;

    const Preset& gbm = lookup_preset("gbm");
    const std::vector<double> gxs{0.5, 1.0, 1.5, 2.0};
    const FieldReport gf = spde_field({0, 16}, gxs, coupled(gbm, 1.0), scheme, p);
    const double gbm_z =
        std::abs(gf.at(0, 1).pooled.mean - std::exp(0.05)) / gf.at(0, 1).pooled.se;
    const HomeoReport mono = field_monotonicity(gf);

    const Preset& loaded = lookup_preset("brownian_loaded");
    const double x = 1.0;
    const FieldReport lf = spde_field({0}, {x}, coupled(loaded, x), scheme, p);
    auto spec = LinearBDSDESpec::constant(p.grid, 0.0, 0.0, 0.2);
    const ForwardPaths fp = euler_forward(p, *loaded.forward, 0, x);
    spec.terminal_values.resize(kW);
    for (std::size_t w = 0; w < kW; ++w) {
        spec.terminal_values[w] = fp.X(static_cast<Eigen::Index>(w), kSteps);
    }
    const LinearSolution lin = explicit_linear_solution(spec, p, 0);
    std::size_t match = 0;
    for (std::size_t b = 0; b < kB; ++b) {
        const double d = std::abs(lf.at(0, 0).per_b[b] - lin.per_b[b]);
        match += d <= 3.0 * std::hypot(lf.at(0, 0).per_b_se[b], lin.per_b_se[b]) ? 1 : 0;
    }
    const double match_frac = static_cast<double>(match) / kB;
    r.detail << "heat " << g(heat_z) << " SE; GBM " << g(gbm_z) << " SE; constant loading match "
             << g(match_frac) << "; field violation fraction " << g(mono.violation_fraction);
    r.require(heat_z <= 3.0, "heat kernel");
    r.require(gbm_z <= 3.0, "GBM mean");
    r.require(match_frac >= 0.99, "constant loading");
    r.require(mono.violation_fraction <= 0.01, "field monotonicity");
}

void forward_moments(Result& r) {
    const DriverPaths& p = desk_paths();
    const double beta = -0.5;
    const double mu = 0.05;
    const double sigma = 0.2;
    const double oracle = std::exp(2.0 * beta * mu + beta * (2.0 * beta - 1.0) * sigma * sigma);
    const Preset& gbm = lookup_preset("gbm");
    const MomentReport m =
        forward_moment_check(*gbm.forward, beta, {2.0, 4.0, 8.0}, p, 0, kSteps, gbm.card);
    double worst = 0.0;
    for (std::size_t k = 0; k < m.ratios.size(); ++k) {
        worst = std::max(worst, std::abs(m.ratios[k] - oracle) / m.ratio_se[k]);
    }
    r.detail << "ratio " << g(m.ratios[0]) << " vs oracle " << g(oracle) << ", worst "
             << g(worst) << " SE";
    r.require(worst <= 3.0, "lognormal oracle");
}

std::string read_file(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

void determinism(Result& r) {
    const std::vector<std::string> configs{
        "[problem]\npreset = paper_arctan\n[verify]\nchecks = all\nfar_xs = -8,8\n",
        "[problem]\npreset = gbm\nx = 1\n[verify]\nchecks = all\nx_lo = 0.5\nx_hi = 2\n"
        "x_points = 4\n",
    };
    const fs::path root = fs::temp_directory_path() / "db_lab_acceptance";
    std::size_t compared = 0;
    bool same = true;
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const ExperimentConfig cfg = parse_config(configs[c]);
        std::vector<fs::path> dirs;
        for (int threads : {1, 4}) {
            set_thread_count(threads);
            const fs::path dir = root / ("cfg" + std::to_string(c) + "_t" + std::to_string(threads));
            fs::remove_all(dir);
            run_experiment(cfg, dir);
            dirs.push_back(dir);
        }
        set_thread_count(0);
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            if (e.path().extension() != ".csv") {
                continue;
            }
            const std::string ref = read_file(e.path());
            for (std::size_t k = 1; k < dirs.size(); ++k) {
                same = same && fs::exists(dirs[k] / e.path().filename()) &&
                       read_file(dirs[k] / e.path().filename()) == ref;
                ++compared;
            }
        }
    }
    r.detail << compared << " CSV comparisons across thread counts 1 and 4";
    r.require(compared > 0 && same, "byte identity");
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<void(Result&)>>> criteria{
        {"linear-oracle agreement", linear_oracle},
        {"Q-factor conditional bounds", q_bounds},
        {"comparison", comparison},
        {"homeomorphism scan", homeomorphism},
        {"Hoelder moment", holder},
        {"negative-moment decay", negative_moment},
        {"envelope sandwich", sandwich},
        {"Feynman-Kac field", feynman_kac},
        {"forward negative moments", forward_moments},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Result r;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            criteria[i].second(r);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail << " [exception: " << e.what() << "]";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s: %s (%.1fs)\n", r.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), r.detail.str().c_str(), secs);
        std::fflush(stdout);
        failures += r.pass ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
                criteria.size());
    return failures == 0 ? 0 : 1;
}
