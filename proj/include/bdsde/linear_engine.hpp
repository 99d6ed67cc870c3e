#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/drivers.hpp"
#include "bdsde/stats.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <vector>

namespace bdsde {

/// Data of the linear BDSDE
///   Y_t = xi + V_T - V_t + int_t^T (a Y + b Z + forcing) ds
///             + int_t^T c Y dB<- - int_t^T Z dW
/// with deterministic per-node coefficients and a deterministic finite
/// variation path V.
struct LinearBDSDESpec {
    std::vector<double> a;       // drift linearization, per node
    std::vector<double> b;       // z-coefficient, per node
    std::vector<double> c;       // backward-noise coefficient, per node
    std::vector<double> forcing; // per node
    std::vector<double> V;       // finite-variation path, per node
    std::vector<double> terminal_values; // xi per W-path
    double bound_f = 1.0; // |a|, |b| <= bound_f
    double bound_g = 1.0; // |c| <= bound_g

    /// Constant coefficients on the grid, V = 0, forcing constant.
    static LinearBDSDESpec constant(const TimeGrid& grid, double a, double b, double c,
                                    double forcing = 0.0);

    /// Positive-variation measure of V accumulated up to the last node, i.e.
    /// the smallest increasing beta with dV+ <= d beta.
    double beta_T() const;
};

/// Terminal values xi(x) per W-path for deterministic or composite families.
std::vector<double> terminal_values(const TerminalFamily& family, double x,
                                    const DriverPaths& paths);

/// Q^t_s for every (B-path, W-path) pair, [M_B x M_W].
struct QFactor {
    std::size_t t_index = 0;
    std::size_t s_index = 0;
    Eigen::MatrixXd values;
};

QFactor q_factor(const LinearBDSDESpec& spec, const DriverPaths& paths, std::size_t t_index,
                 std::size_t s_index);

struct QBoundReport {
    std::vector<double> estimates; // E[Q | F_t] per B-path
    std::vector<double> se;
    double lower = 0.0;
    double upper = 0.0;
    double inside_fraction = 0.0;
    MeanSe pooled;
};

/// Estimates E[Q^t_s | F_t] for each B-path by averaging over W-paths and
/// checks them against exp(-+(bound_f + bound_g)(s - t)) with 3 SE slack.
QBoundReport q_conditional_bounds_check(const LinearBDSDESpec& spec, const DriverPaths& paths,
                                        std::size_t t_index, std::size_t s_index);

struct LinearSolution {
    std::vector<double> per_b;    // Y_t per B-path
    std::vector<double> per_b_se; // W-sampling SE per B-path
    MeanSe pooled;
};

/// Y_t = E[Q^t_T xi | F_t] - int E[Q^t_s | F_t] dV_s + int E[Q^t_s f_s | F_t] ds,
/// conditional expectations taken over W-paths for each frozen B-path.
LinearSolution explicit_linear_solution(const LinearBDSDESpec& spec, const DriverPaths& paths,
                                        std::size_t t_index);

/// X^{+-}_t(x) = h(x) eps0 exp(+-C_f (T - t) + int_t^T a dB<- - 1/2 int_t^T a^2 ds)
/// per B-path. eps0 defaults to card.eps / 2 and must lie in (0, card.eps).
std::vector<double> bounding_envelope(double x, int sign, const NoiseLoadingSpec& loading,
                                      const AssumptionCard& card, const DriverPaths& paths,
                                      const ScalarFn& h, std::optional<double> eps0,
                                      std::size_t t_index);

} // namespace bdsde
