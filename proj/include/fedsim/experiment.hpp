#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/federation.hpp"

namespace fedsim {

// A malformed experiment file (or seed override); carries a
// "file:line: message" diagnostic. Distinct from runtime failures so the
// command line can exit 2 instead of 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SyntheticSpec {
    int classes = 10;
    int per_class = 600;
    int dim = 10;
    int test_per_class = 100;
};

// Parsed experiment file: the federation settings plus where the data comes
// from and where the CSVs go.
struct ExperimentFile {
    FederationConfig federation;
    bool layers_given = false;  // absent: input-128-classes once the data is known
    std::string dataset = "synthetic";  // "synthetic" | "idx"
    SyntheticSpec synthetic;
    std::string train_images, train_labels, test_images, test_labels;
    std::string output_dir = ".";
};

// Flat key = value lines; '#' lines and blank lines are skipped. Unknown or
// duplicate keys are rejected with the offending line. Relative idx and
// output paths are resolved against the config file's directory.
ExperimentFile parse_experiment_file(const std::string& path);

// Same grammar from an in-memory string; `name` stands in for the file name
// in diagnostics and paths are left as written.
ExperimentFile parse_experiment_text(const std::string& text, const std::string& name);

struct LoadedData {
    Dataset train;
    Dataset test;
};

// One generator call split per class: the first per_class examples of every
// class train, the next test_per_class are held out, so both sides share the
// class centers.
LoadedData make_synthetic_split(const SyntheticSpec& spec, std::uint64_t seed);

// Generates or loads the experiment's data and fills in the default network
// shape when the file gave none.
LoadedData prepare_data(ExperimentFile& file);

// Shared experiment presets: one per data regime, used both by the figure
// replication commands and by the validation suite so the two cannot drift.
// Synthetic: 10-10-10 network, batch 8, 50 local steps, 3 epochs per visit,
// 50 rounds, seed 42 — sized so the label-skew pathologies are visible while
// the centralized baseline stays above 0.95 (see docs/pilots.md).
FederationConfig synthetic_preset(Flavor flavor);
// MNIST-scale: 784-128-10 network, batch 128, 46 local steps (about one
// shard epoch per round), 3 epochs per visit, 50 rounds, seed 42.
FederationConfig mnist_preset(Flavor flavor);

// %.12g, enough digits to round-trip the metrics without printing noise.
std::string format_number(double value);

// rounds.csv: round,accuracy,loss,bytes_up,bytes_down,sim_time. UTF-8,
// header row, '.' decimal separator, LF line endings.
void write_rounds_csv(const std::string& path, const std::vector<RoundRecord>& records);

// summary.csv: final_accuracy,total_bytes,sim_time (one data row).
void write_summary_csv(const std::string& path, const RunResult& result);

}  // namespace fedsim
