#pragma once

#include "bdsde/coefficients.hpp"
#include "bdsde/regression.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdsde {

struct ConfigIssue {
    std::size_t line = 0;
    std::string message;
};

/// Every problem found in a config text, in line order.
class ConfigParseError : public std::invalid_argument {
public:
    explicit ConfigParseError(std::vector<ConfigIssue> issues);
    const std::vector<ConfigIssue>& issues() const { return issues_; }

private:
    std::vector<ConfigIssue> issues_;
};

/// Checks run_experiment knows about.
enum class Check {
    Solve,
    Comparison,
    Monotonicity,
    Sandwich,
    Holder,
    NegativeMoment,
    ForwardMoment,
    Field,
};

const char* check_name(Check c);
const std::vector<Check>& all_checks();

struct ExperimentConfig {
    // [grid]
    double T = 1.0;
    long long N = 32;
    // [paths]
    std::size_t M_W = 8192;
    std::size_t M_B = 64;
    std::uint64_t seed = 42;
    // [problem]
    std::string preset = "paper_arctan";
    std::optional<std::string> driver; // zero | arctan | linear
    double lambda = 0.0;
    double mu = 0.0;
    std::optional<double> loading;      // constant loading value
    std::optional<std::string> terminal; // identity | cubic | shift | constant
    double terminal_param = 0.0;
    double x = 0.0;
    std::size_t t_index = 0;
    AssumptionCard card; // preset card with overrides applied
    // [scheme]
    RegressionBasis basis;
    // [verify]
    std::vector<Check> checks{Check::Solve};
    double pass_fraction = 0.99;
    double max_violation_fraction = 0.01;
    double min_slope = 1.0;
    double min_r_squared = 0.99;
    double shift = 1.0;
    double x_lo = -2.0;
    double x_hi = 2.0;
    std::size_t x_points = 21;
    std::vector<double> far_xs;
    std::optional<double> eps0;
    double moment_beta = -0.5;
    // [output]
    std::string directory = "out";

    /// Problem data after applying overrides to the preset.
    Preset resolved_problem() const;
    /// Canonical text listing every effective value; parses back to an equal
    /// config.
    std::string echo() const;
    /// FNV-1a of echo() without the [output] section, hex.
    std::string hash() const;
};

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Throws ConfigParseError listing all problems.
ExperimentConfig parse_config(const std::string& text);

} // namespace bdsde
