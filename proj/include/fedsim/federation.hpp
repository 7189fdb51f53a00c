#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/nn.hpp"
#include "fedsim/simnet.hpp"

namespace fedsim {

enum class Flavor { centralized, flavor1, flavor2 };
enum class PartitionMode { random, by_class };
enum class AveragingWeights { equal, data_size };

// One experiment. exchange_per_class > 0 turns flavor1/flavor2 into the
// data-exchange variant (flavor 3).
struct FederationConfig {
    Flavor flavor = Flavor::flavor1;
    int agencies = 10;
    PartitionMode partition = PartitionMode::random;
    int exchange_per_class = 0;
    int rounds = 50;           // flavor1 / centralized record count
    int passes = 0;            // flavor2 visits; 0 means one visit per agency
    int local_steps = 1;       // mini-batch steps per flavor1 round
    int epochs_per_visit = 1;  // full passes per flavor2 visit
    int batch_size = 128;
    double lr = 0.1;
    std::uint64_t seed = 1;
    NetworkSpec network;
    std::int64_t model_bytes = 0;  // 0: 8 bytes per parameter
    double transfer_cost = 1.0;    // simulated time per data unit moved
    double train_cost = 1.0;       // simulated time per data unit trained
    AveragingWeights weighting = AveragingWeights::equal;
    int threads = 1;  // flavor1 local training workers; never affects results

    std::int64_t effective_model_bytes() const;
    void validate() const;  // throws std::invalid_argument
};

struct AgencyState {
    int id = 0;
    Shard local;
    ModelParams params;
};

// One row of the metric series: global test accuracy/loss after the round,
// plus cumulative traffic and simulated elapsed time.
struct RoundRecord {
    int round = 0;
    double accuracy = 0.0;
    double loss = 0.0;
    std::int64_t bytes_up = 0;
    std::int64_t bytes_down = 0;
    double sim_time = 0.0;
};

struct RunResult {
    std::vector<RoundRecord> records;
    std::vector<std::string> warnings;
    TrafficLedger ledger;
    ModelParams final_params;
};

// Baseline: every shard is shipped to the server once, then the pooled data
// is trained for rounds*local_steps SGD steps with metrics every local_steps.
RunResult run_centralized(const FederationConfig& config, const Dataset& train, const Dataset& test);

// Synchronized rounds: each agency trains local_steps mini-batch steps from
// the current global parameters, the server averages the results in
// ascending agency order and broadcasts. Per round, every agency uploads and
// downloads one model.
RunResult run_flavor1(const FederationConfig& config, const std::vector<Shard>& shards,
                      const Dataset& test);

// Sequential relay: the model trains epochs_per_visit full passes at each
// agency in ascending id order, then hops to the next one. One record per
// visit; one model transfer per hop (the first hop is the server's dispatch).
RunResult run_flavor2(const FederationConfig& config, const std::vector<Shard>& shards,
                      const Dataset& test);

// Data-exchange variant: partitions per the config, tops up every agency
// with exchange_per_class samples of each class it lacks, then dispatches to
// the base flavor unchanged. Exchanged examples are logged as data traffic.
RunResult run_flavor3(const FederationConfig& config, const Dataset& train, const Dataset& test);

// Validates, partitions and dispatches. Fully deterministic given the config
// seed and the datasets.
RunResult run_experiment(const FederationConfig& config, const Dataset& train, const Dataset& test);

struct SweepEntry {
    int exchange_per_class = 0;
    double final_accuracy = 0.0;
};

// Final accuracy as a function of the per-class exchange amount; one
// run_experiment per entry, all from the same seed.
std::vector<SweepEntry> sweep_exchange(const FederationConfig& config, const Dataset& train,
                                       const Dataset& test, const std::vector<int>& exchange_values);

}  // namespace fedsim
