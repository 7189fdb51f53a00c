#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/cli.hpp"
#include "fedsim/cost_model.hpp"
#include "fedsim/experiment.hpp"

using namespace fedsim;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

int run_args(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"fedsim"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

// run_cli writes table output to stdout; reroute it to a file for inspection
int run_args_capture(const std::vector<std::string>& args, std::string* captured) {
    std::fflush(stdout);
    const int saved = dup(fileno(stdout));
    REQUIRE(saved >= 0);
    const std::string path = "/tmp/fedsim_test_capture.txt";
    FILE* redirected = std::freopen(path.c_str(), "w", stdout);
    REQUIRE(redirected != nullptr);
    const int code = run_args(args);
    std::fflush(stdout);
    dup2(saved, fileno(stdout));
    close(saved);
    *captured = slurp(path);
    std::remove(path.c_str());
    return code;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::path("/tmp") / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

const char* kTinyConfig =
    "# tiny synthetic run\n"
    "flavor = flavor1\n"
    "agencies = 3\n"
    "partition = random\n"
    "rounds = 2\n"
    "local_steps = 2\n"
    "batch_size = 8\n"
    "lr = 0.1\n"
    "seed = 5\n"
    "layers = 6,8,4\n"
    "dataset = synthetic\n"
    "classes = 4\n"
    "per_class = 30\n"
    "dim = 6\n"
    "test_per_class = 10\n";

}  // namespace

TEST_CASE("experiment text parses into the config fields") {
    const ExperimentFile file = parse_experiment_text(kTinyConfig, "tiny");
    CHECK(file.federation.flavor == Flavor::flavor1);
    CHECK(file.federation.agencies == 3);
    CHECK(file.federation.partition == PartitionMode::random);
    CHECK(file.federation.rounds == 2);
    CHECK(file.federation.local_steps == 2);
    CHECK(file.federation.batch_size == 8);
    CHECK(file.federation.lr == 0.1);
    CHECK(file.federation.seed == 5);
    CHECK(file.federation.network.layer_sizes == std::vector<int>{6, 8, 4});
    CHECK(file.layers_given);
    CHECK(file.dataset == "synthetic");
    CHECK(file.synthetic.classes == 4);
    CHECK(file.synthetic.per_class == 30);
    CHECK(file.synthetic.dim == 6);
    CHECK(file.synthetic.test_per_class == 10);
}

TEST_CASE("config errors carry the file name, line and offending key") {
    auto message_of = [](const std::string& text) {
        try {
            parse_experiment_text(text, "bad.cfg");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };

    SUBCASE("unknown key") {
        const std::string msg = message_of("flavor = flavor1\nnonsense = 1\n");
        CHECK(msg.find("bad.cfg:2") != std::string::npos);
        CHECK(msg.find("nonsense") != std::string::npos);
    }
    SUBCASE("duplicate key") {
        const std::string msg = message_of("rounds = 2\nrounds = 3\n");
        CHECK(msg.find("bad.cfg:2") != std::string::npos);
        CHECK(msg.find("duplicate") != std::string::npos);
    }
    SUBCASE("malformed integer") {
        const std::string msg = message_of("rounds = twelve\n");
        CHECK(msg.find("bad.cfg:1") != std::string::npos);
        CHECK(msg.find("twelve") != std::string::npos);
    }
    SUBCASE("line without an equals sign") {
        const std::string msg = message_of("just some words\n");
        CHECK(msg.find("bad.cfg:1") != std::string::npos);
    }
    SUBCASE("bad enum value") {
        const std::string msg = message_of("flavor = flavor9\n");
        CHECK(msg.find("flavor9") != std::string::npos);
    }
    SUBCASE("idx dataset without paths") {
        const std::string msg = message_of("dataset = idx\n");
        CHECK(msg.find("train_images") != std::string::npos);
    }
}

TEST_CASE("relative paths resolve against the config directory") {
    TempDir dir("fedsim_cli_paths");
    std::filesystem::create_directories(dir.path / "sub");
    const std::string cfg = dir.file("sub/exp.cfg");
    spit(cfg,
         "dataset = idx\n"
         "train_images = data/a.idx\n"
         "train_labels = data/b.idx\n"
         "test_images = /abs/c.idx\n"
         "test_labels = data/d.idx\n"
         "output_dir = out\n");
    const ExperimentFile file = parse_experiment_file(cfg);
    CHECK(file.train_images == (dir.path / "sub/data/a.idx").string());
    CHECK(file.train_labels == (dir.path / "sub/data/b.idx").string());
    CHECK(file.test_images == "/abs/c.idx");
    CHECK(file.test_labels == (dir.path / "sub/data/d.idx").string());
    CHECK(file.output_dir == (dir.path / "sub/out").string());
}

TEST_CASE("run writes the two CSV files with the exact schema") {
    TempDir dir("fedsim_cli_run");
    const std::string cfg = dir.file("exp.cfg");
    spit(cfg, std::string(kTinyConfig) + "output_dir = out\n");

    unsetenv("FEDSIM_SEED");
    REQUIRE(run_args({"run", cfg}) == 0);

    const std::string rounds = slurp(dir.file("out/rounds.csv"));
    const std::string summary = slurp(dir.file("out/summary.csv"));

    std::istringstream rs(rounds);
    std::string line;
    REQUIRE(std::getline(rs, line));
    CHECK(line == "round,accuracy,loss,bytes_up,bytes_down,sim_time");
    int data_rows = 0;
    while (std::getline(rs, line))
        if (!line.empty()) ++data_rows;
    CHECK(data_rows == 2);
    CHECK(rounds.find("\r") == std::string::npos);

    std::istringstream ss(summary);
    REQUIRE(std::getline(ss, line));
    CHECK(line == "final_accuracy,total_bytes,sim_time");
    REQUIRE(std::getline(ss, line));
    CHECK(!line.empty());

    // a second run reproduces both files byte for byte
    REQUIRE(run_args({"run", cfg}) == 0);
    CHECK(slurp(dir.file("out/rounds.csv")) == rounds);
    CHECK(slurp(dir.file("out/summary.csv")) == summary);
}

TEST_CASE("the seed environment override replaces the config seed") {
    TempDir dir("fedsim_cli_seed");
    const std::string cfg_seed5 = dir.file("seed5.cfg");
    spit(cfg_seed5, std::string(kTinyConfig) + "output_dir = out5\n");

    std::string other = kTinyConfig;
    const auto pos = other.find("seed = 5");
    REQUIRE(pos != std::string::npos);
    other.replace(pos, 8, "seed = 9");
    const std::string cfg_seed9 = dir.file("seed9.cfg");
    spit(cfg_seed9, other + "output_dir = out9\n");

    unsetenv("FEDSIM_SEED");
    REQUIRE(run_args({"run", cfg_seed9}) == 0);
    const std::string native = slurp(dir.file("out9/rounds.csv"));

    setenv("FEDSIM_SEED", "9", 1);
    REQUIRE(run_args({"run", cfg_seed5}) == 0);
    unsetenv("FEDSIM_SEED");
    const std::string overridden = slurp(dir.file("out5/rounds.csv"));
    CHECK(overridden == native);

    setenv("FEDSIM_SEED", "not-a-number", 1);
    CHECK(run_args({"run", cfg_seed5}) == 2);
    unsetenv("FEDSIM_SEED");
}

TEST_CASE("cost subcommand prints the analytical table") {
    std::string out;

    SUBCASE("single point matches time_ratio exactly") {
        REQUIRE(run_args_capture({"cost", "--A", "4,10", "--Mr", "0.1", "--N", "10"}, &out) == 0);
        std::istringstream in(out);
        std::string line;
        REQUIRE(std::getline(in, line));
        CHECK(line == "agencies,network_ratio,ratio");
        CostParams p;
        p.transfer_cost = 10.0;
        p.train_cost = 1.0;
        p.model_ratio = 0.1;
        p.agencies = 4;
        char expected[128];
        std::snprintf(expected, sizeof expected, "4,%.12g,%.12g", 10.0, time_ratio(p));
        REQUIRE(std::getline(in, line));
        CHECK(line == expected);
        p.agencies = 10;
        std::snprintf(expected, sizeof expected, "10,%.12g,%.12g", 10.0, time_ratio(p));
        REQUIRE(std::getline(in, line));
        CHECK(line == expected);
        CHECK(!std::getline(in, line));
    }

    SUBCASE("log-spaced grid has the requested span and row count") {
        REQUIRE(run_args_capture({"cost", "--A", "2", "--Mr", "0.01", "--N-min", "0.1",
                                  "--N-max", "100", "--N-steps", "7"},
                                 &out) == 0);
        std::istringstream in(out);
        std::string line;
        REQUIRE(std::getline(in, line));  // header
        std::vector<double> ns;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto first = line.find(',');
            const auto second = line.find(',', first + 1);
            ns.push_back(std::stod(line.substr(first + 1, second - first - 1)));
        }
        REQUIRE(ns.size() == 7);
        CHECK(ns.front() == doctest::Approx(0.1).epsilon(1e-9));
        CHECK(ns.back() == doctest::Approx(100.0).epsilon(1e-9));
        for (std::size_t i = 1; i < ns.size(); ++i)
            CHECK(ns[i] / ns[i - 1] == doctest::Approx(ns[1] / ns[0]).epsilon(1e-9));
    }

    SUBCASE("grid flags and the point flag are mutually exclusive") {
        CHECK(run_args_capture({"cost", "--A", "2", "--Mr", "0.01", "--N", "1", "--N-min", "0.1",
                                "--N-max", "10", "--N-steps", "3"},
                               &out) == 2);
        CHECK(run_args_capture({"cost", "--A", "2", "--Mr", "0.01"}, &out) == 2);
    }
}

TEST_CASE("exit codes distinguish config errors from success") {
    TempDir dir("fedsim_cli_exit");
    CHECK(run_args({"run", dir.file("missing.cfg")}) == 2);

    const std::string bad = dir.file("bad.cfg");
    spit(bad, "rounds = banana\n");
    CHECK(run_args({"run", bad}) == 2);

    const std::string invalid = dir.file("invalid.cfg");
    spit(invalid, std::string(kTinyConfig) + "exchange_per_class = -3\n");
    CHECK(run_args({"run", invalid}) == 2);

    std::string out;
    CHECK(run_args_capture({"bogus-subcommand"}, &out) == 2);
    CHECK(run_args_capture({"replicate", "fig99"}, &out) == 2);
    CHECK(run_args_capture({"--help"}, &out) == 0);
}
