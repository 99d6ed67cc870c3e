#pragma once

#include "bdsde/config.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bdsde {

enum class CheckStatus { Pass, Fail, Skipped, Error };

const char* status_name(CheckStatus s);

struct CheckOutcome {
    std::string name;
    CheckStatus status = CheckStatus::Skipped;
    /// Metric values in insertion order.
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<std::string> files;
    std::string message;
};

struct RunManifest {
    std::string config_echo;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> versions;
    int threads = 0;
    double wall_clock_seconds = 0.0;
    std::vector<CheckOutcome> checks;
    /// 0 when every check that ran passed, 1 when one failed, 2 on an abort.
    int exit_status = 0;

    std::string to_json() const;
};

/// Runs the configured checks, writing one CSV per report, summary.csv and
/// manifest.json into out_dir. A failing solve stops the run; the manifest is
/// still written with the checks completed so far.
RunManifest run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

struct KernelTiming {
    std::string kernel;
    std::size_t repetitions = 0;
    double median_seconds = 0.0;
    /// paths x steps per second.
    double throughput = 0.0;
    std::string checksum;
    /// Every timed repetition reproduced the untimed reference output.
    bool matches_reference = false;
};

struct BenchReport {
    std::string config_hash;
    int threads = 0;
    std::vector<KernelTiming> kernels;

    std::string to_json() const;
};

/// Times path generation, one Q-factor evaluation and one LSMC sweep.
BenchReport bench_kernel(const ExperimentConfig& config, std::size_t repetitions = 5);

} // namespace bdsde
