#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bdsde {

/// Discretization of [0, T]. Nodes are strictly increasing with
/// nodes.front() == 0 and nodes.back() == T.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> nodes);

    double horizon() const { return nodes_.back(); }
    std::size_t steps() const { return nodes_.size() - 1; }
    const std::vector<double>& nodes() const { return nodes_; }
    double node(std::size_t i) const { return nodes_[i]; }
    /// Length of step i, i.e. t_{i+1} - t_i.
    double dt(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
    bool uniform() const { return uniform_; }

private:
    std::vector<double> nodes_{0.0, 1.0};
    bool uniform_ = true;
};

/// Uniform grid with N steps of size T/N.
TimeGrid make_grid(double horizon, long long steps);

/// Sum of integrand[i] * (path[i+1] - path[i]) over all steps. Both spans hold
/// one value per node; the integrand is read at left endpoints only.
double forward_ito_sum(std::span<const double> path, std::span<const double> integrand);

/// Sum of integrand[i+1] * (path[i+1] - path[i]) over all steps. Both spans
/// hold one value per node; the integrand is read at right endpoints only,
/// which makes each term a backward martingale increment.
double backward_ito_sum(std::span<const double> path, std::span<const double> integrand);

/// Left-Riemann sum of integrand[i] * dt(i) for i in [from, to).
double time_quadrature(const TimeGrid& grid, std::span<const double> integrand,
                       std::size_t from, std::size_t to);

} // namespace bdsde
