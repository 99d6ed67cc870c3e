#include "bdsde/grid.hpp"

#include "bdsde/error.hpp"

#include <cmath>
#include <string>

namespace bdsde {

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) {
        throw ConfigError("time grid needs at least two nodes");
    }
    if (nodes_.front() != 0.0) {
        throw ConfigError("time grid must start at 0");
    }
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        if (!(nodes_[i + 1] > nodes_[i])) {
            throw ConfigError("time grid nodes must be strictly increasing (node " +
                              std::to_string(i + 1) + ")");
        }
    }
    const double h = dt(0);
    uniform_ = true;
    for (std::size_t i = 1; i < steps(); ++i) {
        if (std::abs(dt(i) - h) > 1e-12 * horizon()) {
            uniform_ = false;
            break;
        }
    }
}

TimeGrid make_grid(double horizon, long long steps) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw ConfigError("horizon must be > 0");
    }
    if (steps < 1) {
        throw ConfigError("step_count must be >= 1");
    }
    const auto n = static_cast<std::size_t>(steps);
    std::vector<double> nodes(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(n);
    }
    nodes[n] = horizon;
    return TimeGrid(std::move(nodes));
}

namespace {

void check_lengths(std::span<const double> path, std::span<const double> integrand) {
    if (path.empty() || integrand.size() != path.size()) {
        throw PreconditionError("integrand needs one value per path node (path " +
                                std::to_string(path.size()) + ", integrand " +
                                std::to_string(integrand.size()) + ")");
    }
}

} // namespace

double forward_ito_sum(std::span<const double> path, std::span<const double> integrand) {
    check_lengths(path, integrand);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        sum += integrand[i] * (path[i + 1] - path[i]);
    }
    return sum;
}

double backward_ito_sum(std::span<const double> path, std::span<const double> integrand) {
    check_lengths(path, integrand);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        sum += integrand[i + 1] * (path[i + 1] - path[i]);
    }
    return sum;
}

double time_quadrature(const TimeGrid& grid, std::span<const double> integrand,
                       std::size_t from, std::size_t to) {
    if (from > to || to > grid.steps()) {
        throw PreconditionError("quadrature range [" + std::to_string(from) + ", " +
                                std::to_string(to) + ") outside grid with " +
                                std::to_string(grid.steps()) + " steps");
    }
    if (to > from && integrand.size() < to) {
        throw PreconditionError("integrand shorter than quadrature range");
    }
    double sum = 0.0;
    for (std::size_t i = from; i < to; ++i) {
        sum += integrand[i] * grid.dt(i);
    }
    return sum;
}

} // namespace bdsde
