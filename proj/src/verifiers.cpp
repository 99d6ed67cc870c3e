#include "bdsde/verifiers.hpp"

#include "bdsde/error.hpp"
#include "bdsde/hash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bdsde {

namespace {

constexpr std::size_t kChunk = 8;
constexpr std::uint32_t kHypothesisStream = 3;

Provenance provenance_of(const DriverPaths& paths, const std::string& description) {
    std::ostringstream os;
    os << description << "|T=" << fmt17(paths.grid.horizon()) << "|N=" << paths.steps()
       << "|M_W=" << paths.w_count() << "|M_B=" << paths.b_count()
       << "|seed=" << paths.rng.master_seed;
    return {paths.rng.master_seed, hex64(fnv1a(os.str()))};
}

std::string join(const std::vector<double>& xs) {
    std::string out;
    for (double x : xs) {
        out += fmt17(x);
        out += ',';
    }
    return out;
}

std::string scheme_text(const SchemeConfig& s) {
    return "deg=" + std::to_string(s.basis.degree) + "|q=" + fmt17(s.basis.lower_quantile) + "," +
           fmt17(s.basis.upper_quantile);
}

double fraction(std::size_t hits, std::size_t total) {
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

BdsdeProblem pure_problem(const FlowSpec& flow, double x, std::size_t t_index = 0) {
    if (flow.terminal.form == TerminalForm::ForwardComposite) {
        throw PreconditionError("x-indexed verifiers need a deterministic or composite terminal");
    }
    return {flow.driver, flow.loading, flow.terminal, std::nullopt, x, t_index, std::nullopt};
}

SchemeConfig summaries_only(SchemeConfig scheme) {
    scheme.keep_paths = false;
    return scheme;
}

/// Terminal values per W-path for any terminal form.
std::vector<double> sampled_terminal(const BdsdeProblem& p, const DriverPaths& paths) {
    if (p.terminal.form != TerminalForm::ForwardComposite) {
        return terminal_values(p.terminal, p.x, paths);
    }
    const ForwardPaths fp = euler_forward(paths, *p.forward, p.t_index, p.x);
    std::vector<double> out(paths.w_count());
    const auto last = static_cast<std::ptrdiff_t>(paths.steps());
    for (std::size_t w = 0; w < out.size(); ++w) {
        out[w] = p.forward->h(fp.X(static_cast<std::ptrdiff_t>(w), last));
    }
    return out;
}

/// Per B-path mean and W-sampling SE of a pathwise statistic, pooled.
struct PathwiseStat {
    std::vector<double> per_b;
    std::vector<double> per_b_se;
    MeanSe pooled;
};

/// Runs `per_path(solutions, b_local, w)` over every (B, W) pair, solving the
/// given problems on chunks of B-paths so full path storage stays bounded.
template <class F>
PathwiseStat pathwise(const DriverPaths& paths, const std::vector<BdsdeProblem>& problems,
                      const SchemeConfig& scheme, F per_path) {
    SchemeConfig keep = scheme;
    keep.keep_paths = true;
    const std::size_t mb = paths.b_count();
    const std::size_t mw = paths.w_count();
    PathwiseStat out{std::vector<double>(mb), std::vector<double>(mb), {}};
    std::vector<double> values(mw);
    for (std::size_t first = 0; first < mb; first += kChunk) {
        const std::size_t count = std::min(kChunk, mb - first);
        const DriverPaths sub = select_b_paths(paths, first, count);
        std::vector<BackwardSolution> sols;
        sols.reserve(problems.size());
        for (const auto& p : problems) {
            sols.push_back(solve_bdsde_lsmc(sub, p, keep));
        }
        for (std::size_t b = 0; b < count; ++b) {
            for (std::size_t w = 0; w < mw; ++w) {
                values[w] = per_path(sols, b, static_cast<std::ptrdiff_t>(w));
            }
            const MeanSe s = mean_se(values);
            out.per_b[first + b] = s.mean;
            out.per_b_se[first + b] = s.se;
        }
    }
    out.pooled = pool(out.per_b, out.per_b_se);
    return out;
}

bool ordered(double lo, double hi, Monotone dir) {
    return dir == Monotone::Decreasing ? hi < lo : lo < hi;
}

void fill_fit(MomentReport& r) {
    r.fit_valid = r.estimates.size() >= 2;
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t i = 0; i < r.estimates.size(); ++i) {
        if (!(r.estimates[i] > 0.0) || !(r.abscissa[i] > 0.0) || !std::isfinite(r.estimates[i])) {
            r.fit_valid = false;
            continue;
        }
        lx.push_back(std::log(r.abscissa[i]));
        ly.push_back(std::log(r.estimates[i]));
    }
    if (r.fit_valid) {
        r.fit = fit_line(lx, ly);
    }
}

} // namespace

ComparisonReport comparison_check(const BdsdeProblem& first, const BdsdeProblem& second,
                                  const DriverPaths& paths, const AssumptionCard& card,
                                  const SchemeConfig& scheme, std::size_t probes) {
    if (first.t_index != second.t_index) {
        throw PreconditionError("compared problems must share t_index");
    }
    const double horizon = paths.grid.horizon();
    for (std::size_t i = 0; i < probes; ++i) {
        auto u = [&](std::uint32_t slot, double lo, double hi) {
            return lo + (hi - lo) * paths.rng.uniform(kHypothesisStream, i, slot);
        };
        const double t = u(0, 0.0, horizon);
        const double x = u(1, -5.0, 5.0);
        const double y = u(2, -5.0, 5.0);
        const double z = u(3, -5.0, 5.0);
        const double f1 = first.driver(t, x, y, z);
        const double f2 = second.driver(t, x, y, z);
        if (!(f1 >= f2)) {
            std::ostringstream os;
            os << "driver ordering f1 >= f2 fails at t=" << t << " x=" << x << " y=" << y
               << " z=" << z;
            throw PreconditionError(os.str());
        }
        if (first.loading(t, x) != second.loading(t, x)) {
            throw PreconditionError("compared problems must share the noise loading");
        }
    }

    const SchemeConfig s = summaries_only(scheme);
    const BackwardSolution y1 = solve_bdsde_lsmc(paths, first, s);
    const BackwardSolution y2 = solve_bdsde_lsmc(paths, second, s);
    const std::size_t t = first.t_index;

    ComparisonReport r;
    r.t_index = t;
    const std::vector<double> a = y1.y_at(t);
    const std::vector<double> b = y2.y_at(t);
    const std::vector<double> sa = y1.y_se_at(t);
    const std::vector<double> sb = y2.y_se_at(t);
    std::size_t strict = 0;
    std::size_t equal = 0;
    double min_diff = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        r.differences.push_back(d);
        // Ignores the positive correlation from common random numbers, so it
        // overstates the error of the difference.
        r.difference_se.push_back(std::hypot(sa[k], sb[k]));
        strict += d > 0.0 ? 1 : 0;
        equal += d == 0.0 ? 1 : 0;
        min_diff = std::min(min_diff, d);
    }
    r.strict_fraction = fraction(strict, a.size());
    r.equal_fraction = fraction(equal, a.size());
    r.pass_fraction = r.strict_fraction;

    const std::vector<double> xi1 = sampled_terminal(first, paths);
    const std::vector<double> xi2 = sampled_terminal(second, paths);
    r.eps = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < xi1.size(); ++w) {
        r.eps = std::min(r.eps, xi1[w] - xi2[w]);
    }
    // f1 >= f2 leaves V1 - V2 without positive variation.
    r.beta_T = 0.0;
    const double k = card.C_f + card.C_g + card.alpha_g;
    const double span = horizon - paths.grid.node(t);
    r.proof_bound = std::exp(-k * span) * r.eps - std::exp(k * span) * r.beta_T;
    r.margin = min_diff - r.proof_bound;

    std::ostringstream os;
    os << "comparison|" << first.driver.name << "," << first.terminal.name << "," << fmt17(first.x)
       << "|" << second.driver.name << "," << second.terminal.name << "," << fmt17(second.x)
       << "|" << first.loading.name << "|t=" << t << "|" << scheme_text(scheme);
    r.provenance = provenance_of(paths, os.str());
    return r;
}

double envelope_threshold(const AssumptionCard& card, const ScalarFn& h, double horizon,
                          double eps0) {
    if (!(eps0 > 0.0 && eps0 < card.eps)) {
        throw ConfigError("eps0 must lie in (0, eps)");
    }
    const double need =
        card.C_0 * horizon * std::exp(2.0 * card.C_0 * horizon) / (card.eps - eps0);
    auto holds = [&](double m) { return std::min(std::abs(h(m)), std::abs(h(-m))) >= need; };
    double lo = card.R_0;
    if (holds(lo)) {
        return lo;
    }
    double hi = std::max(2.0 * lo, 1.0);
    while (!holds(hi)) {
        hi *= 2.0;
        if (hi > 1e12) {
            throw PreconditionError("|h| never reaches the envelope level");
        }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (holds(mid) ? hi : lo) = mid;
    }
    return hi;
}

HomeoReport sandwich_check(const FlowSpec& flow, const DriverPaths& paths,
                           const AssumptionCard& card, std::size_t t_index, double x,
                           const std::vector<double>& far_xs, std::optional<double> eps0,
                           const SchemeConfig& scheme) {
    if (!card.claims.bounded_f0) {
        throw ConfigError("sandwich needs a declared C_0 (bounded_f0 claim)");
    }
    if (!flow.loading.spatially_constant) {
        throw PreconditionError("sandwich needs a spatially constant loading");
    }
    const DriverFn f = flow.driver.f;
    const double cf = card.C_f;
    auto envelope = [&](int sign) {
        const double s = sign;
        return DriverSpec{sign > 0 ? "envelope_plus" : "envelope_minus",
                          [f, cf, s](double t, double xx, double y, double z) {
                              return s * (std::abs(f(t, xx, 0.0, 0.0)) +
                                          cf * (std::abs(y) + std::abs(z)));
                          },
                          flow.driver.depends_on_x};
    };
    const FlowSpec plus{envelope(1), flow.loading, flow.terminal};
    const FlowSpec minus{envelope(-1), flow.loading, flow.terminal};
    const SchemeConfig s = summaries_only(scheme);

    HomeoReport r;
    r.xs = {x};
    r.t_indices = {t_index};
    HomeoReport::Envelope env;
    env.x = x;
    env.eps0 = eps0.value_or(card.eps / 2.0);
    env.y = solve_bdsde_lsmc(paths, pure_problem(flow, x, t_index), s).y_at(t_index);
    env.y_hat = solve_bdsde_lsmc(paths, pure_problem(plus, x, t_index), s).y_at(t_index);
    env.y_tilde = solve_bdsde_lsmc(paths, pure_problem(minus, x, t_index), s).y_at(t_index);
    std::size_t both = 0;
    std::size_t lower = 0;
    std::size_t upper = 0;
    for (std::size_t b = 0; b < env.y.size(); ++b) {
        const bool lo = env.y_tilde[b] <= env.y[b];
        const bool hi = env.y[b] <= env.y_hat[b];
        lower += lo ? 1 : 0;
        upper += hi ? 1 : 0;
        both += lo && hi ? 1 : 0;
    }
    env.sandwich_fraction = fraction(both, env.y.size());
    env.lower_fraction = fraction(lower, env.y.size());
    env.upper_fraction = fraction(upper, env.y.size());

    if (!far_xs.empty()) {
        if (!flow.terminal.h) {
            throw PreconditionError("envelope containment needs the growth function h");
        }
        env.threshold_M = envelope_threshold(card, flow.terminal.h, paths.grid.horizon(), env.eps0);
        for (double fx : far_xs) {
            if (std::abs(fx) <= env.threshold_M) {
                continue;
            }
            const int sign = fx < 0.0 ? 1 : -1;
            const FlowSpec& side = sign > 0 ? plus : minus;
            const std::vector<double> y =
                solve_bdsde_lsmc(paths, pure_problem(side, fx, t_index), s).y_at(t_index);
            const std::vector<double> bound = bounding_envelope(
                fx, sign, flow.loading, card, paths, flow.terminal.h, env.eps0, t_index);
            std::size_t inside = 0;
            for (std::size_t b = 0; b < y.size(); ++b) {
                inside += (sign > 0 ? y[b] <= bound[b] : bound[b] <= y[b]) ? 1 : 0;
            }
            env.far_xs.push_back(fx);
            env.far_fractions.push_back(fraction(inside, y.size()));
        }
        for (double v : env.far_fractions) {
            env.escape_fraction = std::min(env.escape_fraction, v);
        }
    }
    r.envelope = env;

    std::ostringstream os;
    os << "sandwich|" << flow.driver.name << "," << flow.loading.name << "," << flow.terminal.name
       << "|x=" << fmt17(x) << "|far=" << join(far_xs) << "|eps0=" << fmt17(env.eps0)
       << "|C_f=" << fmt17(card.C_f) << "|t=" << t_index << "|" << scheme_text(scheme);
    r.provenance = provenance_of(paths, os.str());
    return r;
}

HomeoReport monotonicity_scan(const FlowSpec& flow, const std::vector<double>& xs,
                              const DriverPaths& paths, const std::vector<std::size_t>& t_indices,
                              const SchemeConfig& scheme) {
    if (flow.terminal.monotone == Monotone::None) {
        throw PreconditionError("monotonicity scan needs a monotone terminal family");
    }
    if (xs.size() < 2 || !std::is_sorted(xs.begin(), xs.end()) ||
        std::adjacent_find(xs.begin(), xs.end()) != xs.end()) {
        throw PreconditionError("x grid must have at least two strictly increasing points");
    }
    if (t_indices.empty()) {
        throw PreconditionError("no t rows requested");
    }
    for (std::size_t t : t_indices) {
        if (t > paths.steps()) {
            throw PreconditionError("t index beyond the last node");
        }
    }
    const SchemeConfig s = summaries_only(scheme);
    const std::size_t nt = t_indices.size();
    const std::size_t mb = paths.b_count();
    // per_x[x][t] holds per B-path estimates.
    std::vector<std::vector<std::vector<double>>> per_x;
    HomeoReport r;
    r.xs = xs;
    r.t_indices = t_indices;
    r.direction = flow.terminal.monotone;
    r.pooled.assign(nt, std::vector<double>(xs.size()));
    r.pooled_se.assign(nt, std::vector<double>(xs.size()));
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const BackwardSolution sol = solve_bdsde_lsmc(paths, pure_problem(flow, xs[k]), s);
        std::vector<std::vector<double>> rows;
        for (std::size_t ti = 0; ti < nt; ++ti) {
            rows.push_back(sol.y_at(t_indices[ti]));
            r.pooled[ti][k] = sol.y_pooled[t_indices[ti]].mean;
            r.pooled_se[ti][k] = sol.y_pooled[t_indices[ti]].se;
        }
        per_x.push_back(std::move(rows));
    }
    r.violations.assign(nt, std::vector<std::size_t>(mb, 0));
    for (std::size_t ti = 0; ti < nt; ++ti) {
        for (std::size_t b = 0; b < mb; ++b) {
            for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
                if (!ordered(per_x[k][ti][b], per_x[k + 1][ti][b], r.direction)) {
                    ++r.violations[ti][b];
                }
            }
            r.violation_total += r.violations[ti][b];
        }
    }
    r.pair_count = nt * mb * (xs.size() - 1);
    r.violation_fraction = fraction(r.violation_total, r.pair_count);

    const std::vector<double>& row = r.pooled[0];
    for (std::size_t k = (xs.size() - 1) / 2 + 1; k-- > 0;) {
        const std::size_t hi = xs.size() - 1 - k;
        if (hi <= k) {
            continue;
        }
        const auto [mn, mx] = std::minmax_element(row.begin() + static_cast<std::ptrdiff_t>(k),
                                                  row.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
        r.range_growth.push_back({xs[k], xs[hi], *mn, *mx});
    }

    std::ostringstream os;
    os << "scan|" << flow.driver.name << "," << flow.loading.name << "," << flow.terminal.name
       << "|xs=" << join(xs) << "|t=";
    for (std::size_t t : t_indices) {
        os << t << ',';
    }
    os << "|" << scheme_text(scheme);
    r.provenance = provenance_of(paths, os.str());
    return r;
}

HomeoReport::Inverse inverse_probe(const HomeoReport& report, double target, std::size_t t_row,
                                   const std::function<double(double)>& evaluator) {
    using Status = HomeoReport::Inverse::Status;
    if (t_row >= report.pooled.size()) {
        throw PreconditionError("t row beyond the scanned rows");
    }
    const std::vector<double>& xs = report.xs;
    const std::vector<double>& ys = report.pooled[t_row];
    HomeoReport::Inverse out;
    out.target = target;
    const double sgn = report.direction == Monotone::Decreasing ? -1.0 : 1.0;
    for (std::size_t k = 0; k + 1 < ys.size(); ++k) {
        if (!(sgn * (ys[k + 1] - ys[k]) > 0.0)) {
            out.status = Status::NotMonotone;
            out.residual = std::numeric_limits<double>::infinity();
            return out;
        }
    }
    const double y_lo = sgn > 0 ? ys.front() : ys.back();
    const double y_hi = sgn > 0 ? ys.back() : ys.front();
    const double x_at_lo = sgn > 0 ? xs.front() : xs.back();
    const double x_at_hi = sgn > 0 ? xs.back() : xs.front();
    if (target == y_lo || target == y_hi) {
        out.status = Status::OutOfRangeEdge;
        out.x_hat = target == y_lo ? x_at_lo : x_at_hi;
        return out;
    }
    if (target < y_lo || target > y_hi) {
        out.status = Status::OutOfRange;
        out.x_hat = target < y_lo ? x_at_lo : x_at_hi;
        out.residual = target < y_lo ? y_lo - target : target - y_hi;
        return out;
    }
    auto curve = [&](double x) {
        if (evaluator) {
            return evaluator(x);
        }
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t k =
            std::min<std::size_t>(static_cast<std::size_t>(std::max<std::ptrdiff_t>(
                                      it - xs.begin() - 1, 0)),
                                  xs.size() - 2);
        const double w = (x - xs[k]) / (xs[k + 1] - xs[k]);
        return ys[k] + w * (ys[k + 1] - ys[k]);
    };
    const double tol = 1e-3 * (y_hi - y_lo);
    double lo = xs.front();
    double hi = xs.back();
    out.status = Status::NoConvergence;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = curve(mid);
        out.x_hat = mid;
        out.residual = std::abs(v - target);
        if (out.residual <= tol) {
            out.status = Status::Ok;
            break;
        }
        if (sgn * (v - target) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return out;
}

MomentReport holder_moment_estimate(const FlowSpec& flow, const std::vector<PairSpec>& pairs,
                                    const DriverPaths& paths, double radius,
                                    const SchemeConfig& scheme) {
    if (pairs.size() < 3) {
        throw PreconditionError("Hoelder fit needs at least 3 pairs");
    }
    for (const auto& p : pairs) {
        if (std::abs(p.x) > radius || std::abs(p.y) > radius) {
            throw PreconditionError("pair outside the declared radius");
        }
        if (p.x == p.y) {
            throw PreconditionError("pair with x == y");
        }
    }
    const std::size_t n = paths.steps();
    MomentReport r;
    std::ostringstream os;
    os << "holder|" << flow.driver.name << "," << flow.loading.name << "," << flow.terminal.name
       << "|R=" << fmt17(radius) << "|pairs=";
    for (const auto& p : pairs) {
        const PathwiseStat st = pathwise(
            paths, {pure_problem(flow, p.x), pure_problem(flow, p.y)}, scheme,
            [n](const std::vector<BackwardSolution>& sols, std::size_t b, std::ptrdiff_t w) {
                double worst = 0.0;
                for (std::size_t i = 0; i <= n; ++i) {
                    const auto ii = static_cast<std::ptrdiff_t>(i);
                    const double d = sols[0].Y[b](w, ii) - sols[1].Y[b](w, ii);
                    worst = std::max(worst, d * d);
                }
                return worst;
            });
        r.abscissa.push_back(std::abs(p.x - p.y));
        r.estimates.push_back(st.pooled.mean);
        r.se.push_back(st.pooled.se);
        os << fmt17(p.x) << ':' << fmt17(p.y) << ',';
    }
    fill_fit(r);
    os << "|" << scheme_text(scheme);
    r.provenance = provenance_of(paths, os.str());
    return r;
}

MomentReport negative_moment_decay(const FlowSpec& flow, const std::vector<double>& xs,
                                   double beta, const DriverPaths& paths,
                                   const std::optional<AssumptionCard>& card,
                                   const SchemeConfig& scheme) {
    if (!flow.loading.is_zero) {
        throw PreconditionError("negative moment decay needs a zero noise loading");
    }
    if (!(beta < 0.0)) {
        throw ConfigError("beta must be negative");
    }
    if (card && !(beta < std::min((1.0 - 2.0 * card->C_1) / 2.0, 0.0))) {
        throw ConfigError("beta must lie below min((1 - 2 C_1) / 2, 0)");
    }
    if (xs.empty()) {
        throw PreconditionError("no x points given");
    }
    const std::size_t n = paths.steps();
    const double p4 = 4.0 * beta;
    MomentReport r;
    for (double x : xs) {
        const PathwiseStat st = pathwise(
            paths, {pure_problem(flow, x)}, scheme,
            [n, p4](const std::vector<BackwardSolution>& sols, std::size_t b, std::ptrdiff_t w) {
                double worst = 0.0;
                for (std::size_t i = 0; i <= n; ++i) {
                    worst = std::max(
                        worst, std::pow(std::abs(sols[0].Y[b](w, static_cast<std::ptrdiff_t>(i))), p4));
                }
                return worst;
            });
        r.abscissa.push_back(std::abs(x));
        r.estimates.push_back(st.pooled.mean);
        r.se.push_back(st.pooled.se);
    }
    r.non_increasing = true;
    for (std::size_t k = 1; k < r.estimates.size(); ++k) {
        const double slack = 3.0 * std::hypot(r.se[k], r.se[k - 1]);
        if (!(r.estimates[k] <= r.estimates[k - 1] + slack)) {
            r.non_increasing = false;
        }
    }
    fill_fit(r);
    std::ostringstream os;
    os << "negmoment|" << flow.driver.name << "," << flow.terminal.name << "|beta=" << fmt17(beta)
       << "|xs=" << join(xs) << "|" << scheme_text(scheme);
    r.provenance = provenance_of(paths, os.str());
    return r;
}

MomentReport forward_moment_check(const ForwardSpec& fwd, double beta,
                                  const std::vector<double>& xs, const DriverPaths& paths,
                                  std::size_t t_index, std::size_t s_index,
                                  const std::optional<AssumptionCard>& card) {
    if (!(beta < 0.0)) {
        throw ConfigError("beta must be negative");
    }
    if (t_index > s_index || s_index > paths.steps()) {
        throw PreconditionError("need t_index <= s_index <= N");
    }
    for (double x : xs) {
        if (!(std::abs(x) > 1.0)) {
            throw PreconditionError("forward moment probes need |x| > 1");
        }
    }
    if (card) {
        AssumptionCard growth = *card;
        growth.claims = Claims{};
        growth.claims.lipschitz_f = false;
        growth.claims.lipschitz_g = false;
        growth.claims.linear_g = false;
        growth.claims.forward_growth = true;
        const AuditReport audit = audit_assumptions({nullptr, nullptr, nullptr, &fwd}, growth, 4096,
                                                    paths.rng);
        if (!audit.passed()) {
            throw ConfigError("forward coefficients fail the linear growth audit");
        }
    }
    const double p2 = 2.0 * beta;
    const auto s = static_cast<std::ptrdiff_t>(s_index);
    MomentReport r;
    std::vector<double> v(paths.w_count());
    for (double x : xs) {
        const ForwardPaths fp = euler_forward(paths, fwd, t_index, x);
        for (std::size_t w = 0; w < v.size(); ++w) {
            v[w] = std::pow(std::abs(fp.X(static_cast<std::ptrdiff_t>(w), s)), p2);
        }
        const MeanSe m = mean_se(v);
        const double scale = std::pow(std::abs(x), p2);
        r.abscissa.push_back(std::abs(x));
        r.estimates.push_back(m.mean);
        r.se.push_back(m.se);
        r.ratios.push_back(m.mean / scale);
        r.ratio_se.push_back(m.se / scale);
        r.empirical_C = std::max(r.empirical_C, m.mean / scale);
    }
    fill_fit(r);
    std::ostringstream os;
    os << "fwdmoment|" << fwd.name << "|beta=" << fmt17(beta) << "|xs=" << join(xs)
       << "|t=" << t_index << "|s=" << s_index;
    r.provenance = provenance_of(paths, os.str());
    return r;
}

HomeoReport field_monotonicity(const FieldReport& field) {
    HomeoReport r;
    r.xs = field.xs;
    r.t_indices = field.t_indices;
    r.direction = field.h_monotone == Monotone::Decreasing ? Monotone::Decreasing
                                                           : Monotone::Increasing;
    const std::size_t nt = field.t_indices.size();
    const std::size_t nx = field.xs.size();
    const std::size_t mb = field.points.empty() ? 0 : field.points.front().per_b.size();
    r.violations.assign(nt, std::vector<std::size_t>(mb, 0));
    r.pooled.assign(nt, std::vector<double>(nx));
    r.pooled_se.assign(nt, std::vector<double>(nx));
    for (std::size_t ti = 0; ti < nt; ++ti) {
        for (std::size_t xi = 0; xi < nx; ++xi) {
            r.pooled[ti][xi] = field.at(ti, xi).pooled.mean;
            r.pooled_se[ti][xi] = field.at(ti, xi).pooled.se;
        }
        for (std::size_t b = 0; b < mb; ++b) {
            for (std::size_t xi = 0; xi + 1 < nx; ++xi) {
                if (!ordered(field.at(ti, xi).per_b[b], field.at(ti, xi + 1).per_b[b],
                             r.direction)) {
                    ++r.violations[ti][b];
                }
            }
            r.violation_total += r.violations[ti][b];
        }
    }
    r.pair_count = nt * mb * (nx > 0 ? nx - 1 : 0);
    r.violation_fraction = fraction(r.violation_total, r.pair_count);
    return r;
}

} // namespace bdsde
