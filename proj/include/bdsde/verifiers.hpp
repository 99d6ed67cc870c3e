#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/drivers.hpp"
#include "bdsde/linear_engine.hpp"
#include "bdsde/lsmc.hpp"
#include "bdsde/stats.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bdsde {

/// Enough to replay a report: the master seed and a hash of every input that
/// shaped it. The experiment layer overwrites config_hash with the hash of the
/// full config text.
struct Provenance {
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// Y^1_t - Y^2_t per B-path for two problems solved on the same paths.
struct ComparisonReport {
    std::size_t t_index = 0;
    std::vector<double> differences;
    std::vector<double> difference_se;
    double strict_fraction = 0.0; // Y1 > Y2
    double equal_fraction = 0.0;  // Y1 == Y2
    double pass_fraction = 0.0;   // strict_fraction
    /// Infimum of xi1 - xi2 over the sampled terminal values.
    double eps = 0.0;
    double beta_T = 0.0;
    /// exp(-K T) eps - exp(K T) beta_T with K = C_f + C_g + alpha_g.
    double proof_bound = 0.0;
    /// min difference - proof_bound.
    double margin = 0.0;
    Provenance provenance;
};

/// Monotonicity scan, inverse probes and envelope sections. Sections a
/// verifier does not fill stay empty.
struct HomeoReport {
    std::vector<double> xs;
    std::vector<std::size_t> t_indices;
    /// Adjacent-pair order violations, [t][b].
    std::vector<std::vector<std::size_t>> violations;
    std::size_t pair_count = 0; // adjacent pairs x B-paths x t rows
    std::size_t violation_total = 0;
    double violation_fraction = 0.0;
    /// Pooled means, [t][x].
    std::vector<std::vector<double>> pooled;
    std::vector<std::vector<double>> pooled_se;
    /// Surjectivity proxy: pooled range over symmetric windows of the grid at
    /// the first t row, widest last.
    struct Window {
        double x_lo = 0.0;
        double x_hi = 0.0;
        double y_min = 0.0;
        double y_max = 0.0;
    };
    std::vector<Window> range_growth;
    Monotone direction = Monotone::Increasing;

    struct Inverse {
        double target = 0.0;
        double x_hat = 0.0;
        double residual = 0.0;
        enum class Status { Ok, OutOfRange, OutOfRangeEdge, NotMonotone, NoConvergence } status =
            Status::Ok;
    };
    std::vector<Inverse> inverses;

    struct Envelope {
        double x = 0.0;
        double eps0 = 0.0;
        double threshold_M = 0.0;
        /// Per B-path Y~ <= Y <= Y^ at x.
        double sandwich_fraction = 0.0;
        double lower_fraction = 0.0;
        double upper_fraction = 0.0;
        std::vector<double> y, y_hat, y_tilde;
        /// Probe points beyond M: Y^ <= X+ for x < -M, X- <= Y~ for x > M.
        std::vector<double> far_xs;
        std::vector<double> far_fractions;
        double escape_fraction = 1.0; // min over far points, 1 when none
    };
    std::optional<Envelope> envelope;

    Provenance provenance;
};

struct MomentReport {
    std::vector<double> abscissa; // |x - y| or |x|
    std::vector<double> estimates;
    std::vector<double> se;
    LineFit fit; // log estimate against log abscissa
    bool fit_valid = false;
    /// Forward moments: estimate / |x|^{2 beta} and its maximum.
    std::vector<double> ratios;
    std::vector<double> ratio_se;
    double empirical_C = 0.0;
    /// Decay check: each estimate <= its predecessor + 3 combined SE.
    bool non_increasing = false;
    Provenance provenance;
};

struct PairSpec {
    double x = 0.0;
    double y = 0.0;
};

/// Problem data shared by the x-indexed verifiers.
struct FlowSpec {
    DriverSpec driver;
    NoiseLoadingSpec loading;
    TerminalFamily terminal;
};

/// Solves both problems on the same paths and compares Y_t per B-path.
/// Throws PreconditionError when f1 < f2 on a probe or the loadings differ.
ComparisonReport comparison_check(const BdsdeProblem& first, const BdsdeProblem& second,
                                  const DriverPaths& paths, const AssumptionCard& card,
                                  const SchemeConfig& scheme = {}, std::size_t probes = 4096);

/// Smallest M >= R_0 with |h(x)| >= C_0 T e^{2 C_0 T} / (eps - eps0) for all
/// |x| > M, assuming |h| grows with |x| beyond R_0.
double envelope_threshold(const AssumptionCard& card, const ScalarFn& h, double horizon,
                          double eps0);

/// Envelope drivers +-(|f(s, 0, 0)| + C_f (|y| + |z|)) around f at x, and
/// containment in X+- at the far probe points. eps0 defaults to eps / 2.
HomeoReport sandwich_check(const FlowSpec& flow, const DriverPaths& paths,
                           const AssumptionCard& card, std::size_t t_index, double x,
                           const std::vector<double>& far_xs = {},
                           std::optional<double> eps0 = std::nullopt,
                           const SchemeConfig& scheme = {});

HomeoReport monotonicity_scan(const FlowSpec& flow, const std::vector<double>& xs,
                              const DriverPaths& paths, const std::vector<std::size_t>& t_indices,
                              const SchemeConfig& scheme = {});

/// Bisection for x with Ybar^x_t = target. Without an evaluator the scanned
/// pooled means are interpolated linearly. t_row indexes report.t_indices.
HomeoReport::Inverse inverse_probe(const HomeoReport& report, double target, std::size_t t_row = 0,
                                   const std::function<double(double)>& evaluator = {});

/// E sup_t |Y^x_t - Y^y_t|^2 per pair, fitted against |x - y| on log scales.
MomentReport holder_moment_estimate(const FlowSpec& flow, const std::vector<PairSpec>& pairs,
                                    const DriverPaths& paths, double radius,
                                    const SchemeConfig& scheme = {});

/// E sup_t |Y^x_t|^{4 beta} over growing x. Needs a zero loading; when a card
/// is given beta must be below min((1 - 2 C_1) / 2, 0).
MomentReport negative_moment_decay(const FlowSpec& flow, const std::vector<double>& xs,
                                   double beta, const DriverPaths& paths,
                                   const std::optional<AssumptionCard>& card = std::nullopt,
                                   const SchemeConfig& scheme = {});

/// E|X^{t,x}_s|^{2 beta} for |x| > 1 and its ratio to |x|^{2 beta}.
MomentReport forward_moment_check(const ForwardSpec& fwd, double beta,
                                  const std::vector<double>& xs, const DriverPaths& paths,
                                  std::size_t t_index, std::size_t s_index,
                                  const std::optional<AssumptionCard>& card = std::nullopt);

/// Adjacent-x order violations of u(t, .) per B-path for every t row.
HomeoReport field_monotonicity(const FieldReport& field);

} // namespace bdsde
