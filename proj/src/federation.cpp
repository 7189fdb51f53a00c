#include "fedsim/federation.hpp"

#include <algorithm>
#include <exception>
#include <stdexcept>
#include <thread>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

// Seed stream tags; training seeds are mix_seed(seed, round, agency).
constexpr std::uint64_t kPartitionStream = 1;
constexpr std::uint64_t kExchangeStream = 2;

void append_unique(std::vector<std::string>& out, const std::vector<std::string>& in) {
    for (const std::string& w : in)
        if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
}

void check_datasets(const FederationConfig& config, const Dataset& train, const Dataset& test) {
    train.validate();
    test.validate();
    if (config.network.input_size() != train.dim())
        throw std::invalid_argument("network input width " +
                                    std::to_string(config.network.input_size()) +
                                    " does not match feature dimension " + std::to_string(train.dim()));
    if (test.dim() != train.dim())
        throw std::invalid_argument("train and test feature dimensions differ");
    if (config.network.class_count() != train.class_count)
        throw std::invalid_argument("network output width " +
                                    std::to_string(config.network.class_count()) +
                                    " does not match class count " + std::to_string(train.class_count));
    if (test.class_count > train.class_count)
        throw std::invalid_argument("test set has more classes than the training set");
}

const Dataset& shard_base(const std::vector<Shard>& shards) {
    if (shards.empty()) throw std::invalid_argument("no shards given");
    const Dataset* base = shards.front().base;
    for (const Shard& s : shards) {
        if (s.base == nullptr) throw std::invalid_argument("shard has no backing dataset");
        if (s.base != base) throw std::invalid_argument("shards must view the same dataset");
    }
    return *base;
}

// Simulated-clock bookkeeping shared by the three run loops. Data amounts
// are measured in shards of the base dataset: one unit is total_bytes / A.
struct Clock {
    CostParams cp;
    double unit_bytes = 1.0;
    ComputeModel model = ComputeModel::parallel_clients;
    std::vector<double> units;  // cumulative per trainer

    Clock(const FederationConfig& config, const Dataset& base, ComputeModel m, int trainers)
        : cp{config.transfer_cost, config.train_cost, config.agencies, 0.0},
          unit_bytes(static_cast<double>(base.total_bytes()) / config.agencies),
          model(m),
          units(trainers, 0.0) {}

    void add_training(int trainer, std::int64_t examples, const Dataset& base) {
        units[trainer] +=
            static_cast<double>(examples) * static_cast<double>(base.bytes_per_example()) / unit_bytes;
    }

    double now(const TrafficLedger& ledger) const {
        return simulated_time(ledger, cp, units, model, unit_bytes);
    }
};

RoundRecord make_record(int round, const EvalResult& eval, const TrafficLedger& ledger,
                        const Clock& clock) {
    return RoundRecord{round,           eval.accuracy,        eval.mean_loss,
                       ledger.bytes_up(), ledger.bytes_down(), clock.now(ledger)};
}

// Core synchronized-rounds loop; `result.ledger` may already carry exchange
// traffic from the flavor-3 preamble.
RunResult flavor1_loop(const FederationConfig& config, const std::vector<Shard>& shards,
                       const Dataset& test, RunResult result) {
    const Dataset& base = shard_base(shards);
    const NetworkSpec& spec = config.network;
    const int agencies = config.agencies;
    const std::int64_t model_bytes = config.effective_model_bytes();

    Clock clock(config, base, ComputeModel::parallel_clients, agencies);
    ModelParams global = init_params(spec, config.seed);

    for (int a = 0; a < agencies; ++a)
        if (shards[a].size() == 0)
            result.warnings.push_back("agency " + std::to_string(a) +
                                      " has no local data and contributes unchanged parameters");

    const int workers = std::max(1, std::min(config.threads, agencies));
    std::vector<ModelParams> locals(agencies);
    std::vector<TrainInfo> infos(agencies);
    std::vector<std::vector<std::string>> local_warnings(agencies);

    for (int round = 1; round <= config.rounds; ++round) {
        auto train_slice = [&](int worker) {
            for (int a = worker; a < agencies; a += workers) {
                if (shards[a].size() == 0) continue;
                local_warnings[a].clear();
                locals[a] = train_local(global, spec, shards[a], config.local_steps,
                                        config.batch_size, config.lr,
                                        mix_seed(config.seed, static_cast<std::uint64_t>(round),
                                                 static_cast<std::uint64_t>(a)),
                                        &infos[a], &local_warnings[a]);
            }
        };
        if (workers == 1) {
            train_slice(0);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(workers);
            for (int t = 0; t < workers; ++t)
                pool.emplace_back([&, t] {
                    try {
                        train_slice(t);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            for (std::thread& th : pool) th.join();
            for (const std::exception_ptr& e : errors)
                if (e) std::rethrow_exception(e);
        }

        std::vector<ModelParams> contributions;
        std::vector<double> weights;
        for (int a = 0; a < agencies; ++a) {
            // Every agency uploads; one with no data sends its params back
            // unchanged (a zero data-size weight drops out of the sum).
            result.ledger.record_transfer(a, TrafficLedger::server_id, model_bytes,
                                          TransferKind::model);
            if (shards[a].size() == 0) {
                if (config.weighting == AveragingWeights::equal) {
                    contributions.push_back(global);
                    weights.push_back(1.0);
                }
                continue;
            }
            append_unique(result.warnings, local_warnings[a]);
            clock.add_training(a, infos[a].examples_seen, base);
            contributions.push_back(std::move(locals[a]));
            weights.push_back(config.weighting == AveragingWeights::data_size
                                  ? static_cast<double>(shards[a].size())
                                  : 1.0);
        }
        if (weights.empty()) throw std::invalid_argument("no agency has any data to train on");
        global = average_params(contributions, weights);
        for (int a = 0; a < agencies; ++a)
            result.ledger.record_transfer(TrafficLedger::server_id, a, model_bytes,
                                          TransferKind::model);

        result.records.push_back(
            make_record(round, evaluate(global, spec, test), result.ledger, clock));
    }

    result.final_params = std::move(global);
    return result;
}

// Core sequential-relay loop; one record per visit.
RunResult flavor2_loop(const FederationConfig& config, const std::vector<Shard>& shards,
                       const Dataset& test, RunResult result) {
    const Dataset& base = shard_base(shards);
    const NetworkSpec& spec = config.network;
    const int agencies = config.agencies;
    const std::int64_t model_bytes = config.effective_model_bytes();
    const int visits = config.passes > 0 ? config.passes : agencies;

    Clock clock(config, base, ComputeModel::sequential, agencies);
    ModelParams model = init_params(spec, config.seed);

    int holder = TrafficLedger::server_id;
    for (int visit = 1; visit <= visits; ++visit) {
        const int a = (visit - 1) % agencies;
        // a lone agency keeps the model between visits: nothing moves
        if (holder != a)
            result.ledger.record_transfer(holder, a, model_bytes, TransferKind::model);
        holder = a;

        if (shards[a].size() == 0) {
            const std::string w = "agency " + std::to_string(a) +
                                  " has no local data; the model passes through untrained";
            if (std::find(result.warnings.begin(), result.warnings.end(), w) ==
                result.warnings.end())
                result.warnings.push_back(w);
        } else {
            const int steps_per_epoch = (shards[a].size() + config.batch_size - 1) / config.batch_size;
            TrainInfo info;
            std::vector<std::string> warnings;
            model = train_local(model, spec, shards[a], config.epochs_per_visit * steps_per_epoch,
                                config.batch_size, config.lr,
                                mix_seed(config.seed, static_cast<std::uint64_t>(visit),
                                         static_cast<std::uint64_t>(a)),
                                &info, &warnings);
            append_unique(result.warnings, warnings);
            clock.add_training(a, info.examples_seen, base);
        }

        result.records.push_back(
            make_record(visit, evaluate(model, spec, test), result.ledger, clock));
    }

    result.final_params = std::move(model);
    return result;
}

PartitionPlan make_plan(const FederationConfig& config, const Dataset& train) {
    if (config.partition == PartitionMode::random)
        return partition_random(train, config.agencies, mix_seed(config.seed, kPartitionStream));
    return partition_by_class(train, config.agencies);
}

}  // namespace

std::int64_t FederationConfig::effective_model_bytes() const {
    if (model_bytes > 0) return model_bytes;
    return static_cast<std::int64_t>(network.param_count()) * 8;
}

void FederationConfig::validate() const {
    network.validate();
    if (agencies < 1) throw std::invalid_argument("agency count must be at least one");
    if (rounds < 1) throw std::invalid_argument("round count must be at least one");
    if (passes < 0) throw std::invalid_argument("pass count must be non-negative");
    if (local_steps < 1) throw std::invalid_argument("local step count must be at least one");
    if (epochs_per_visit < 1) throw std::invalid_argument("epochs per visit must be at least one");
    if (batch_size < 1) throw std::invalid_argument("batch size must be at least one");
    if (!(lr > 0.0) || !std::isfinite(lr))
        throw std::invalid_argument("learning rate must be positive and finite");
    if (exchange_per_class < 0)
        throw std::invalid_argument("exchange amount must be non-negative");
    if (flavor == Flavor::centralized && exchange_per_class > 0)
        throw std::invalid_argument("data exchange does not apply to the centralized baseline");
    if (model_bytes < 0) throw std::invalid_argument("model size must be non-negative");
    if (!(transfer_cost >= 0.0) || !std::isfinite(transfer_cost))
        throw std::invalid_argument("transfer cost must be non-negative and finite");
    if (!(train_cost > 0.0) || !std::isfinite(train_cost))
        throw std::invalid_argument("training cost must be positive and finite");
    if (threads < 1) throw std::invalid_argument("thread count must be at least one");
}

RunResult run_centralized(const FederationConfig& config, const Dataset& train, const Dataset& test) {
    config.validate();
    check_datasets(config, train, test);
    if (config.flavor != Flavor::centralized)
        throw std::invalid_argument("config flavor is not centralized");

    // Every agency ships its shard to the server once, up front.
    PartitionPlan plan = make_plan(config, train);
    RunResult result;
    for (int a = 0; a < plan.agencies(); ++a)
        result.ledger.record_transfer(a, TrafficLedger::server_id,
                                      train.bytes_per_example() *
                                          static_cast<std::int64_t>(plan.assignments[a].size()),
                                      TransferKind::data);

    Clock clock(config, train, ComputeModel::sequential, 1);
    ModelParams params = init_params(config.network, config.seed);
    for (int round = 1; round <= config.rounds; ++round) {
        TrainInfo info;
        std::vector<std::string> warnings;
        params = train_local(params, config.network, train, config.local_steps, config.batch_size,
                             config.lr,
                             mix_seed(config.seed, static_cast<std::uint64_t>(round), 0), &info,
                             &warnings);
        append_unique(result.warnings, warnings);
        clock.add_training(0, info.examples_seen, train);
        result.records.push_back(
            make_record(round, evaluate(params, config.network, test), result.ledger, clock));
    }
    result.final_params = std::move(params);
    return result;
}

RunResult run_flavor1(const FederationConfig& config, const std::vector<Shard>& shards,
                      const Dataset& test) {
    config.validate();
    if (static_cast<int>(shards.size()) != config.agencies)
        throw std::invalid_argument("shard count does not match agency count");
    check_datasets(config, shard_base(shards), test);
    return flavor1_loop(config, shards, test, RunResult{});
}

RunResult run_flavor2(const FederationConfig& config, const std::vector<Shard>& shards,
                      const Dataset& test) {
    config.validate();
    if (static_cast<int>(shards.size()) != config.agencies)
        throw std::invalid_argument("shard count does not match agency count");
    check_datasets(config, shard_base(shards), test);
    return flavor2_loop(config, shards, test, RunResult{});
}

RunResult run_flavor3(const FederationConfig& config, const Dataset& train, const Dataset& test) {
    config.validate();
    check_datasets(config, train, test);
    if (config.flavor == Flavor::centralized)
        throw std::invalid_argument("config flavor is not federated");

    PartitionPlan plan = make_plan(config, train);
    std::vector<Shard> shards = apply_exchange(train, plan, config.exchange_per_class,
                                               mix_seed(config.seed, kExchangeStream));

    // Exchanged examples travel before training starts; the broker relaying
    // them is modeled as the server.
    RunResult preamble;
    for (int a = 0; a < config.agencies; ++a) {
        const std::int64_t gained = shards[a].bytes() -
                                    train.bytes_per_example() *
                                        static_cast<std::int64_t>(plan.assignments[a].size());
        if (gained > 0)
            preamble.ledger.record_transfer(TrafficLedger::server_id, a, gained,
                                            TransferKind::data);
    }

    if (config.flavor == Flavor::flavor1)
        return flavor1_loop(config, shards, test, std::move(preamble));
    return flavor2_loop(config, shards, test, std::move(preamble));
}

RunResult run_experiment(const FederationConfig& config, const Dataset& train, const Dataset& test) {
    if (config.flavor == Flavor::centralized) return run_centralized(config, train, test);
    return run_flavor3(config, train, test);
}

std::vector<SweepEntry> sweep_exchange(const FederationConfig& config, const Dataset& train,
                                       const Dataset& test,
                                       const std::vector<int>& exchange_values) {
    std::vector<SweepEntry> entries;
    entries.reserve(exchange_values.size());
    for (int k : exchange_values) {
        FederationConfig step = config;
        step.exchange_per_class = k;
        RunResult run = run_experiment(step, train, test);
        entries.push_back(SweepEntry{k, run.records.back().accuracy});
    }
    return entries;
}

}  // namespace fedsim
