#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/drivers.hpp"
#include "bdsde/regression.hpp"
#include "bdsde/stats.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace bdsde {

/// Euler paths of the forward SDE started at (t_index, x), [M_W x (N+1)].
/// Nodes before t_index hold x.
struct ForwardPaths {
    std::size_t start_index = 0;
    double x = 0.0;
    Eigen::MatrixXd X;
};

ForwardPaths euler_forward(const DriverPaths& paths, const ForwardSpec& fwd, std::size_t t_index,
                           double x);

struct SchemeConfig {
    RegressionBasis basis;
    /// Keep per-(B-path, W-path, node) values of Y and Z. Node summaries are
    /// always kept.
    bool keep_paths = true;
    /// Probe count for the pre-solve assumption audit (when a card is given).
    std::size_t audit_probes = 4096;
};

/// Everything a backward solve needs besides the driver paths.
struct BdsdeProblem {
    DriverSpec driver;
    NoiseLoadingSpec loading;
    TerminalFamily terminal;
    std::optional<ForwardSpec> forward;
    /// Terminal parameter for pure problems, forward start point otherwise.
    double x = 0.0;
    std::size_t t_index = 0;
    /// When present the claimed hypotheses are audited before simulating.
    std::optional<AssumptionCard> card;
};

struct BackwardSolution {
    std::size_t t_index = 0;
    /// Per B-path matrices [M_W x (N+1)] for Y and [M_W x N] for Z; empty
    /// unless SchemeConfig::keep_paths. Nodes before t_index hold the start
    /// value.
    std::vector<Eigen::MatrixXd> Y;
    std::vector<Eigen::MatrixXd> Z;
    /// Per B-path node means and W-sampling standard errors.
    Eigen::MatrixXd y_mean; // [M_B x (N+1)]
    Eigen::MatrixXd y_se;
    Eigen::MatrixXd z_mean; // [M_B x N]
    Eigen::MatrixXd z_se;
    /// Pooled over B-paths, one entry per node.
    std::vector<MeanSe> y_pooled;
    std::vector<MeanSe> z_pooled;
    /// Regression degree used at each node (-1 for nodes before t_index).
    std::vector<int> degree_used;
    std::vector<std::string> warnings;

    std::size_t b_count() const { return static_cast<std::size_t>(y_mean.rows()); }
    /// Y_t estimates per B-path at a node.
    std::vector<double> y_at(std::size_t node) const;
    std::vector<double> y_se_at(std::size_t node) const;
};

/// Explicit one-step scheme, backward in i for each frozen B-path:
///   G   = a(t_{i+1}, X_{i+1}) Y_{i+1} dB_i
///   Y~  = E[Y_{i+1} + G | X_i]
///   Z   = E[(Y_{i+1} + G - Y~) dW_i | X_i] / dt
///   Y_i = Y~ + f(t_i, X_i, Y~, Z) dt
/// Conditional expectations are regressions on the state cross-section.
BackwardSolution solve_bdsde_lsmc(const DriverPaths& paths, const BdsdeProblem& problem,
                                  const SchemeConfig& scheme = {});

struct FieldPoint {
    std::size_t t_index = 0;
    double x = 0.0;
    std::vector<double> per_b;
    std::vector<double> per_b_se;
    MeanSe pooled;
};

/// u(t, x) = Y_t^{t,x} on a lattice; row-major in (t, x).
struct FieldReport {
    std::vector<std::size_t> t_indices;
    std::vector<double> xs;
    std::vector<FieldPoint> points;
    Monotone h_monotone = Monotone::None;

    const FieldPoint& at(std::size_t ti, std::size_t xi) const {
        return points[ti * xs.size() + xi];
    }
};

/// Solves the coupled forward-backward system for every lattice point on the
/// same driver paths, so different x share common random numbers.
FieldReport spde_field(const std::vector<std::size_t>& t_indices, const std::vector<double>& xs,
                       const BdsdeProblem& problem, const SchemeConfig& scheme,
                       const DriverPaths& paths);

} // namespace bdsde
