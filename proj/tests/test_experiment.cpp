#include "doctest.h"

#include "bdsde/experiment.hpp"
#include "bdsde/parallel.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace bdsde;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("db_lab_test_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig golden_config(const std::string& name) {
    return parse_config(read_file(fs::path(DB_LAB_GOLDEN_DIR) / (name + ".cfg")));
}

std::vector<std::string> csv_files(const fs::path& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".csv") {
            out.push_back(e.path().filename().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void require_same_csvs(const fs::path& a, const fs::path& b) {
    const auto files = csv_files(a);
    REQUIRE(!files.empty());
    CHECK(files == csv_files(b));
    for (const auto& f : files) {
        INFO(f);
        CHECK(read_file(a / f) == read_file(b / f));
    }
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DB_LAB_BINARY) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("golden outputs are reproduced byte for byte") {
    for (const std::string name : {"arctan", "brownian"}) {
        INFO(name);
        const fs::path out = scratch("golden_" + name);
        const RunManifest m = run_experiment(golden_config(name), out);
        CHECK(m.exit_status == 0);
        require_same_csvs(fs::path(DB_LAB_GOLDEN_DIR) / name, out);
    }
}

TEST_CASE("repeated runs and thread counts give identical CSVs") {
    const ExperimentConfig cfg = golden_config("arctan");
    const fs::path a = scratch("rep_a");
    const fs::path b = scratch("rep_b");
    const fs::path c = scratch("rep_c");
    set_thread_count(1);
    run_experiment(cfg, a);
    set_thread_count(4);
    run_experiment(cfg, b);
    set_thread_count(0);
    run_experiment(cfg, c);
    require_same_csvs(a, b);
    require_same_csvs(a, c);
}

TEST_CASE("manifest config echo replays the run") {
    const fs::path first = scratch("replay_a");
    run_experiment(golden_config("brownian"), first);
    const auto manifest = nlohmann::json::parse(read_file(first / "manifest.json"));
    CHECK(manifest["seed"] == 11);
    CHECK(manifest["exit_status"] == 0);
    CHECK(manifest["checks"].size() == 3);
    const ExperimentConfig replay = parse_config(manifest["config"].get<std::string>());
    CHECK(replay.hash() == manifest["config_hash"].get<std::string>());
    const fs::path second = scratch("replay_b");
    run_experiment(replay, second);
    require_same_csvs(first, second);
}

TEST_CASE("additive shift comparison passes exactly") {
    const ExperimentConfig cfg = parse_config("[grid]\nN = 8\n[paths]\nM_W = 128\nM_B = 8\n"
                                              "[problem]\npreset = zero\n"
                                              "[verify]\nchecks = comparison\n");
    const fs::path out = scratch("shift");
    const RunManifest m = run_experiment(cfg, out);
    CHECK(m.exit_status == 0);
    REQUIRE(m.checks.size() == 1);
    CHECK(m.checks[0].status == CheckStatus::Pass);
    CHECK(m.checks[0].metrics[0] == std::pair<std::string, double>{"pass_fraction", 1.0});
    std::istringstream rows(read_file(out / "comparison.csv"));
    std::string line;
    std::getline(rows, line);
    CHECK(line == "b_path,difference,difference_se");
    while (std::getline(rows, line)) {
        CHECK(line.substr(line.find(',') + 1, 2) == "1,");
    }
}

TEST_CASE("failed thresholds and aborts set the exit status") {
    ExperimentConfig cfg = golden_config("arctan");
    cfg.checks = {Check::Holder};
    cfg.min_slope = 5.0;
    RunManifest m = run_experiment(cfg, scratch("fail"));
    CHECK(m.exit_status == 1);
    CHECK(m.checks[0].status == CheckStatus::Fail);

    // An understated Lipschitz constant fails the pre-solve audit.
    cfg = golden_config("arctan");
    cfg.card.C_f = 1.0;
    const fs::path out = scratch("abort");
    m = run_experiment(cfg, out);
    CHECK(m.exit_status == 2);
    REQUIRE(m.checks.size() == 1);
    CHECK(m.checks[0].status == CheckStatus::Error);
    CHECK(m.checks[0].message.find("H1_f") != std::string::npos);
    const auto manifest = nlohmann::json::parse(read_file(out / "manifest.json"));
    CHECK(manifest["exit_status"] == 2);
}

TEST_CASE("inapplicable checks are skipped") {
    ExperimentConfig cfg = golden_config("brownian");
    cfg.checks = {Check::Comparison, Check::NegativeMoment};
    const RunManifest m = run_experiment(cfg, scratch("skip"));
    CHECK(m.exit_status == 0);
    for (const auto& c : m.checks) {
        CHECK(c.status == CheckStatus::Skipped);
    }
}

TEST_CASE("bench reports throughput and stable checksums") {
    ExperimentConfig cfg = golden_config("arctan");
    set_thread_count(1);
    const BenchReport one = bench_kernel(cfg);
    set_thread_count(3);
    const BenchReport three = bench_kernel(cfg);
    set_thread_count(0);
    REQUIRE(one.kernels.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(one.kernels[k].repetitions >= 5);
        CHECK(one.kernels[k].throughput > 0.0);
        CHECK(one.kernels[k].matches_reference);
        CHECK(one.kernels[k].checksum == three.kernels[k].checksum);
    }
    cfg.M_W *= 2;
    const BenchReport doubled = bench_kernel(cfg);
    CHECK(doubled.kernels[0].checksum != one.kernels[0].checksum);
}

TEST_CASE("command line front end") {
    const std::string cfg = (fs::path(DB_LAB_GOLDEN_DIR) / "arctan.cfg").string();
    const fs::path a = scratch("cli_a");
    const fs::path b = scratch("cli_b");
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("run --config " + cfg + " --out-dir " + a.string() + " --threads 1") == 0);
    CHECK(run_cli("run --config " + cfg + " --out-dir " + b.string() + " --threads 2") == 0);
    require_same_csvs(a, b);
    CHECK(run_cli("run --config " + cfg + " --out-dir " + b.string() + " --seed 8") == 0);
    CHECK(read_file(a / "solve.csv") != read_file(b / "solve.csv"));
    CHECK(run_cli("run --config /nonexistent.cfg") == 2);
    CHECK(run_cli("bench --config " + cfg) == 0);
    CHECK(run_cli("frobnicate") != 0);

    const fs::path bad = scratch("cli_bad");
    fs::create_directories(bad);
    std::ofstream(bad / "bad.cfg") << "[grid]\nN = 0\n";
    CHECK(run_cli("run --config " + (bad / "bad.cfg").string()) == 2);

    const std::string env_cmd = "DB_LAB_THREADS=2 " + std::string(DB_LAB_BINARY) + " run --config " +
                                cfg + " --out-dir " + b.string() + " > /dev/null 2>&1";
    CHECK(std::system(env_cmd.c_str()) == 0);
    const auto manifest = nlohmann::json::parse(read_file(b / "manifest.json"));
    CHECK(manifest["threads"] == 2);
    require_same_csvs(a, b);
}
