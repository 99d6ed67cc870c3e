#include "bdsde/config.hpp"
#include "bdsde/experiment.hpp"
#include "bdsde/parallel.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

struct RunOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

int resolve_threads(const std::optional<int>& flag) {
    if (flag) {
        return *flag;
    }
    if (const char* env = std::getenv("DB_LAB_THREADS")) {
        try {
            return std::stoi(env);
        } catch (const std::exception&) {
            std::cerr << "ignoring invalid DB_LAB_THREADS='" << env << "'\n";
        }
    }
    return 0;
}

std::optional<bdsde::ExperimentConfig> load(const RunOptions& opt) {
    std::ifstream in(opt.config);
    if (!in) {
        std::cerr << "cannot read config " << opt.config << "\n";
        return std::nullopt;
    }
    std::stringstream text;
    text << in.rdbuf();
    try {
        bdsde::ExperimentConfig cfg = bdsde::parse_config(text.str());
        if (opt.seed) {
            cfg.seed = *opt.seed;
        }
        if (opt.out_dir) {
            cfg.directory = *opt.out_dir;
        }
        return cfg;
    } catch (const bdsde::ConfigParseError& e) {
        for (const auto& issue : e.issues()) {
            std::cerr << opt.config << ":" << issue.line << ": " << issue.message << "\n";
        }
        return std::nullopt;
    }
}

int run(const RunOptions& opt, bool all) {
    auto cfg = load(opt);
    if (!cfg) {
        return 2;
    }
    if (all) {
        cfg->checks = bdsde::all_checks();
    }
    bdsde::set_thread_count(resolve_threads(opt.threads));
    const bdsde::RunManifest m = bdsde::run_experiment(*cfg, cfg->directory);
    for (const auto& c : m.checks) {
        std::cout << c.name << ": " << bdsde::status_name(c.status);
        if (!c.message.empty()) {
            std::cout << " (" << c.message << ")";
        }
        std::cout << "\n";
    }
    std::cout << "manifest: " << (std::filesystem::path(cfg->directory) / "manifest.json").string()
              << "\n";
    return m.exit_status;
}

int bench(const RunOptions& opt) {
    auto cfg = load(opt);
    if (!cfg) {
        return 2;
    }
    bdsde::set_thread_count(resolve_threads(opt.threads));
    const bdsde::BenchReport r = bdsde::bench_kernel(*cfg);
    std::cout << r.to_json();
    for (const auto& k : r.kernels) {
        if (!k.matches_reference) {
            return 1;
        }
    }
    return 0;
}

void add_common(CLI::App* app, RunOptions& opt) {
    app->add_option("--config", opt.config, "Experiment config file")->required();
    app->add_option("--threads", opt.threads, "Worker threads (0 = all cores)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical lab for backward doubly stochastic differential equations"};
    app.require_subcommand(1);

    RunOptions run_opt;
    RunOptions verify_opt;
    RunOptions bench_opt;
    for (auto [name, help, opt] :
         {std::tuple{"run", "Run the checks listed in the config", &run_opt},
          std::tuple{"verify", "Run every applicable check", &verify_opt}}) {
        CLI::App* sub = app.add_subcommand(name, help);
        add_common(sub, *opt);
        sub->add_option("--seed", opt->seed, "Override the master seed");
        sub->add_option("--out-dir", opt->out_dir, "Override the output directory");
    }
    CLI::App* bench_cmd = app.add_subcommand("bench", "Time the core kernels");
    add_common(bench_cmd, bench_opt);

    CLI11_PARSE(app, argc, argv);

    if (app.got_subcommand("run")) {
        return run(run_opt, false);
    }
    if (app.got_subcommand("verify")) {
        return run(verify_opt, true);
    }
    return bench(bench_opt);
}
