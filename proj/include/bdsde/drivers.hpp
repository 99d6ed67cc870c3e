#pragma once

#include "bdsde/grid.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace bdsde {

enum class Driver : std::uint32_t { W = 0, B = 1 };

/// Seed plus substream layout. Each (driver, path, step) triple owns one
/// Philox counter: ctr = (step, path_lo, path_hi, driver), key = seed words.
struct RngSpec {
    std::uint64_t master_seed = 0;

    /// Standard normal owned by the given triple.
    double normal(Driver driver, std::uint64_t path, std::uint32_t step) const noexcept;

    /// Uniform on (0, 1) from an auxiliary stream (stream >= 2; 0 and 1 belong
    /// to the drivers). Used for probing, never for path increments.
    double uniform(std::uint32_t stream, std::uint64_t index, std::uint32_t slot) const noexcept;
};

/// Increments of the forward driver W and the backward driver B on a grid.
/// Matrices are column-major with one row per path and one column per step,
/// so a column is the cross-section of all paths at one step.
struct DriverPaths {
    TimeGrid grid;
    Eigen::MatrixXd dW;
    Eigen::MatrixXd dB;
    RngSpec rng;

    std::size_t w_count() const { return static_cast<std::size_t>(dW.rows()); }
    std::size_t b_count() const { return static_cast<std::size_t>(dB.rows()); }
    std::size_t steps() const { return grid.steps(); }

    /// W-path values at all nodes (W_0 = 0).
    std::vector<double> w_values(std::size_t path) const;
    /// B-path values at all nodes (B_0 = 0).
    std::vector<double> b_values(std::size_t path) const;
    /// W at every node for every path, [M_W x (N+1)].
    Eigen::MatrixXd w_value_matrix() const;
};

/// Fills M_W W-paths and M_B B-paths on the grid. Output is bit-identical for
/// identical inputs regardless of thread count.
DriverPaths sample_driver_paths(const TimeGrid& grid, std::size_t w_count, std::size_t b_count,
                                const RngSpec& rng);

/// Aggregates `factor` consecutive steps into one. The grid step count must be
/// divisible by factor. Used to compare step sizes on the same Brownian sample.
DriverPaths coarsen(const DriverPaths& paths, std::size_t factor);

/// B-paths [first, first + count) with all W-paths. Solves on the subset
/// reproduce the corresponding rows of a full solve bit-exactly.
DriverPaths select_b_paths(const DriverPaths& paths, std::size_t first, std::size_t count);

} // namespace bdsde
