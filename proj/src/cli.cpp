#include "fedsim/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedsim/cost_model.hpp"
#include "fedsim/experiment.hpp"

namespace fedsim {

namespace {

std::optional<std::uint64_t> seed_override() {
    const char* raw = std::getenv("FEDSIM_SEED");
    if (raw == nullptr) return std::nullopt;
    const std::string text(raw);
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw ConfigError("FEDSIM_SEED: invalid seed '" + text + "'");
    }
}

void report_warnings(const RunResult& result) {
    for (const std::string& w : result.warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_run(const std::string& config_path) {
    ExperimentFile file = parse_experiment_file(config_path);
    if (const auto seed = seed_override()) file.federation.seed = *seed;
    LoadedData data = prepare_data(file);
    std::filesystem::create_directories(file.output_dir);

    RunResult result = run_experiment(file.federation, data.train, data.test);
    report_warnings(result);
    write_rounds_csv(file.output_dir + "/rounds.csv", result.records);
    write_summary_csv(file.output_dir + "/summary.csv", result);
    return 0;
}

std::vector<double> log_grid(double lo, double hi, int steps) {
    if (!(lo > 0.0)) throw ConfigError("cost: --N-min must be > 0 for a log-spaced grid");
    if (!(hi >= lo)) throw ConfigError("cost: --N-max must be >= --N-min");
    if (steps < 1) throw ConfigError("cost: --N-steps must be >= 1");
    std::vector<double> grid;
    grid.reserve(steps);
    if (steps == 1) {
        grid.push_back(lo);
        return grid;
    }
    const double ratio = std::log(hi / lo);
    for (int i = 0; i < steps; ++i)
        grid.push_back(lo * std::exp(ratio * static_cast<double>(i) / (steps - 1)));
    return grid;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "agencies,network_ratio,ratio\n";
    for (const SweepRow& r : rows)
        out << r.agencies << ',' << format_number(r.network_ratio) << ','
            << format_number(r.ratio) << '\n';
}

int cmd_cost(const std::vector<int>& agencies, double model_ratio, std::optional<double> n_single,
             std::optional<double> n_min, std::optional<double> n_max, std::optional<int> n_steps) {
    std::vector<double> grid;
    if (n_single.has_value()) {
        if (n_min || n_max || n_steps)
            throw ConfigError("cost: give either --N or the --N-min/--N-max/--N-steps range");
        grid.push_back(*n_single);
    } else if (n_min && n_max && n_steps) {
        grid = log_grid(*n_min, *n_max, *n_steps);
    } else {
        throw ConfigError("cost: give either --N or all of --N-min, --N-max, --N-steps");
    }
    write_sweep_csv(std::cout, sweep_curve(grid, agencies, model_ratio));
    return 0;
}

LoadedData replicate_data(bool synthetic, const std::string& mnist_dir, std::uint64_t seed) {
    if (synthetic) return make_synthetic_split(SyntheticSpec{}, seed);
    LoadedData data;
    data.train = load_idx(mnist_dir + "/train-images-idx3-ubyte",
                          mnist_dir + "/train-labels-idx1-ubyte");
    data.test =
        load_idx(mnist_dir + "/t10k-images-idx3-ubyte", mnist_dir + "/t10k-labels-idx1-ubyte");
    return data;
}

void emit_curve(const std::string& out_dir, const std::string& name, const RunResult& result) {
    report_warnings(result);
    write_rounds_csv(out_dir + "/" + name + ".csv", result.records);
}

int cmd_replicate(const std::string& figure, bool synthetic, const std::string& mnist_dir,
                  const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    if (figure == "fig4") {
        // Gain vs. relative network performance, one curve per agency count.
        const std::vector<double> grid = log_grid(0.1, 100.0, 25);
        for (int a : {2, 5, 10, 20}) {
            std::ofstream out(out_dir + "/fig4_agencies_" + std::to_string(a) + ".csv",
                              std::ios::binary);
            if (!out) throw std::runtime_error("cannot write fig4 output");
            write_sweep_csv(out, sweep_curve(grid, {a}, 0.01));
        }
        return 0;
    }

    if (synthetic == !mnist_dir.empty())
        throw ConfigError("replicate: " + figure + " needs exactly one of --synthetic or --mnist DIR");

    FederationConfig base =
        synthetic ? synthetic_preset(Flavor::flavor1) : mnist_preset(Flavor::flavor1);
    if (const auto seed = seed_override()) base.seed = *seed;
    const LoadedData data = replicate_data(synthetic, mnist_dir, base.seed);
    base.network.layer_sizes.front() = data.train.dim();
    base.network.layer_sizes.back() = data.train.class_count;

    auto variant = [&base](Flavor flavor, PartitionMode partition, int exchange) {
        FederationConfig config = base;
        config.flavor = flavor;
        config.partition = partition;
        config.exchange_per_class = exchange;
        return config;
    };
    auto run = [&data](const FederationConfig& config) {
        return run_experiment(config, data.train, data.test);
    };

    if (figure == "fig6") {
        emit_curve(out_dir, "fig6_flavor1",
                   run(variant(Flavor::flavor1, PartitionMode::random, 0)));
        emit_curve(out_dir, "fig6_centralized",
                   run(variant(Flavor::centralized, PartitionMode::random, 0)));
    } else if (figure == "fig7") {
        emit_curve(out_dir, "fig7_flavor2",
                   run(variant(Flavor::flavor2, PartitionMode::random, 0)));
        emit_curve(out_dir, "fig7_centralized",
                   run(variant(Flavor::centralized, PartitionMode::random, 0)));
    } else if (figure == "fig8") {
        emit_curve(out_dir, "fig8_flavor1",
                   run(variant(Flavor::flavor1, PartitionMode::by_class, 0)));
        emit_curve(out_dir, "fig8_flavor2",
                   run(variant(Flavor::flavor2, PartitionMode::by_class, 0)));
    } else if (figure == "fig9") {
        emit_curve(out_dir, "fig9_flavor1_k0",
                   run(variant(Flavor::flavor1, PartitionMode::by_class, 0)));
        emit_curve(out_dir, "fig9_flavor1_k128",
                   run(variant(Flavor::flavor1, PartitionMode::by_class, 128)));
        emit_curve(out_dir, "fig9_flavor2_k0",
                   run(variant(Flavor::flavor2, PartitionMode::by_class, 0)));
        emit_curve(out_dir, "fig9_flavor2_k128",
                   run(variant(Flavor::flavor2, PartitionMode::by_class, 128)));
    } else if (figure == "fig10") {
        const int one_percent = data.train.size() / data.train.class_count / 100;
        std::set<int> grid{0, one_percent, 16, 64, 128};
        std::ofstream out(out_dir + "/fig10_sweep.csv", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write fig10 output");
        out << "exchange_per_class,final_accuracy\n";
        for (const SweepEntry& entry :
             sweep_exchange(variant(Flavor::flavor1, PartitionMode::by_class, 0), data.train,
                            data.test, std::vector<int>(grid.begin(), grid.end())))
            out << entry.exchange_per_class << ',' << format_number(entry.final_accuracy) << '\n';
    } else {
        throw ConfigError("replicate: unknown figure '" + figure + "'");
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Federated training simulator: flavors, cost model, figure replication"};
    app.require_subcommand(1);

    std::string config_path;
    CLI::App* run = app.add_subcommand("run", "Run one experiment from a config file");
    run->add_option("config", config_path, "key = value experiment file")->required();

    std::string figure;
    std::string mnist_dir;
    std::string out_dir = ".";
    bool synthetic = false;
    CLI::App* replicate = app.add_subcommand("replicate", "Re-run a figure's experiment grid");
    replicate->add_option("figure", figure, "one of fig4, fig6, fig7, fig8, fig9, fig10")
        ->required()
        ->check(CLI::IsMember({"fig4", "fig6", "fig7", "fig8", "fig9", "fig10"}));
    replicate->add_option("--mnist", mnist_dir, "directory with the four MNIST idx files");
    replicate->add_flag("--synthetic", synthetic, "use the built-in synthetic blobs");
    replicate->add_option("--out", out_dir, "output directory (default .)");

    std::vector<int> agencies;
    double model_ratio = 0.0;
    std::optional<double> n_single, n_min, n_max;
    std::optional<int> n_steps;
    CLI::App* cost = app.add_subcommand("cost", "Print the analytical time-ratio table as CSV");
    cost->add_option("--A", agencies, "agency counts (repeat or comma-separate)")
        ->required()
        ->delimiter(',');
    cost->add_option("--Mr", model_ratio, "model reduction ratio")->required();
    cost->add_option("--N", n_single, "single network/compute ratio");
    cost->add_option("--N-min", n_min, "range start (log-spaced)");
    cost->add_option("--N-max", n_max, "range end");
    cost->add_option("--N-steps", n_steps, "number of grid points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (replicate->parsed()) return cmd_replicate(figure, synthetic, mnist_dir, out_dir);
        return cmd_cost(agencies, model_ratio, n_single, n_min, n_max, n_steps);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace fedsim
