#include "bdsde/drivers.hpp"

#include "bdsde/error.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/philox.hpp"

#include <cmath>
#include <new>
#include <string>

namespace bdsde {

double RngSpec::normal(Driver driver, std::uint64_t path, std::uint32_t step) const noexcept {
    const Philox4x32::counter_type ctr{step, static_cast<std::uint32_t>(path),
                                       static_cast<std::uint32_t>(path >> 32),
                                       static_cast<std::uint32_t>(driver)};
    const Philox4x32::key_type key{static_cast<std::uint32_t>(master_seed),
                                   static_cast<std::uint32_t>(master_seed >> 32)};
    return normal_from_block(Philox4x32::block(ctr, key));
}

double RngSpec::uniform(std::uint32_t stream, std::uint64_t index,
                        std::uint32_t slot) const noexcept {
    const Philox4x32::counter_type ctr{slot, static_cast<std::uint32_t>(index),
                                       static_cast<std::uint32_t>(index >> 32), stream};
    const Philox4x32::key_type key{static_cast<std::uint32_t>(master_seed),
                                   static_cast<std::uint32_t>(master_seed >> 32)};
    const auto r = Philox4x32::block(ctr, key);
    return to_open_unit(r[0], r[1]);
}

namespace {

void fill(Eigen::MatrixXd& out, const TimeGrid& grid, const RngSpec& rng, Driver driver) {
    const auto rows = static_cast<std::ptrdiff_t>(out.rows());
    const auto cols = static_cast<std::ptrdiff_t>(out.cols());
    std::vector<double> scale(static_cast<std::size_t>(cols));
    for (std::ptrdiff_t j = 0; j < cols; ++j) {
        scale[static_cast<std::size_t>(j)] = std::sqrt(grid.dt(static_cast<std::size_t>(j)));
    }
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t p = 0; p < rows; ++p) {
        for (std::ptrdiff_t j = 0; j < cols; ++j) {
            out(p, j) = scale[static_cast<std::size_t>(j)] *
                        rng.normal(driver, static_cast<std::uint64_t>(p),
                                   static_cast<std::uint32_t>(j));
        }
    }
}

std::vector<double> cumulative(const Eigen::MatrixXd& inc, std::size_t path) {
    if (path >= static_cast<std::size_t>(inc.rows())) {
        throw PreconditionError("path index " + std::to_string(path) + " out of range");
    }
    std::vector<double> v(static_cast<std::size_t>(inc.cols()) + 1, 0.0);
    for (std::ptrdiff_t j = 0; j < inc.cols(); ++j) {
        v[static_cast<std::size_t>(j) + 1] =
            v[static_cast<std::size_t>(j)] + inc(static_cast<std::ptrdiff_t>(path), j);
    }
    return v;
}

} // namespace

std::vector<double> DriverPaths::w_values(std::size_t path) const { return cumulative(dW, path); }

std::vector<double> DriverPaths::b_values(std::size_t path) const { return cumulative(dB, path); }

Eigen::MatrixXd DriverPaths::w_value_matrix() const {
    Eigen::MatrixXd w(dW.rows(), dW.cols() + 1);
    w.col(0).setZero();
    for (std::ptrdiff_t j = 0; j < dW.cols(); ++j) {
        w.col(j + 1) = w.col(j) + dW.col(j);
    }
    return w;
}

DriverPaths sample_driver_paths(const TimeGrid& grid, std::size_t w_count, std::size_t b_count,
                                const RngSpec& rng) {
    if (w_count < 1 || b_count < 1) {
        throw ConfigError("path counts must be >= 1");
    }
    DriverPaths out;
    out.grid = grid;
    out.rng = rng;
    const auto n = static_cast<std::ptrdiff_t>(grid.steps());
    try {
        out.dW.resize(static_cast<std::ptrdiff_t>(w_count), n);
        out.dB.resize(static_cast<std::ptrdiff_t>(b_count), n);
    } catch (const std::bad_alloc&) {
        throw ResourceError("cannot allocate driver increments for " + std::to_string(w_count) +
                            " x " + std::to_string(b_count) + " paths");
    }
    fill(out.dW, grid, rng, Driver::W);
    fill(out.dB, grid, rng, Driver::B);
    return out;
}

DriverPaths coarsen(const DriverPaths& paths, std::size_t factor) {
    const std::size_t n = paths.steps();
    if (factor < 1 || n % factor != 0) {
        throw PreconditionError("coarsening factor " + std::to_string(factor) +
                                " does not divide " + std::to_string(n) + " steps");
    }
    const std::size_t coarse = n / factor;
    std::vector<double> nodes(coarse + 1);
    for (std::size_t k = 0; k <= coarse; ++k) {
        nodes[k] = paths.grid.node(k * factor);
    }
    DriverPaths out;
    out.grid = TimeGrid(std::move(nodes));
    out.rng = paths.rng;
    auto sum_cols = [&](const Eigen::MatrixXd& in) {
        Eigen::MatrixXd res = Eigen::MatrixXd::Zero(in.rows(), static_cast<std::ptrdiff_t>(coarse));
        for (std::size_t k = 0; k < coarse; ++k) {
            for (std::size_t j = 0; j < factor; ++j) {
                res.col(static_cast<std::ptrdiff_t>(k)) +=
                    in.col(static_cast<std::ptrdiff_t>(k * factor + j));
            }
        }
        return res;
    };
    out.dW = sum_cols(paths.dW);
    out.dB = sum_cols(paths.dB);
    return out;
}

} // namespace bdsde

namespace bdsde {

DriverPaths select_b_paths(const DriverPaths& paths, std::size_t first, std::size_t count) {
    if (count == 0 || first + count > paths.b_count()) {
        throw PreconditionError("B-path range out of bounds");
    }
    DriverPaths out{paths.grid, paths.dW, {}, paths.rng};
    out.dB = paths.dB.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
    return out;
}

} // namespace bdsde
