#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/cost_model.hpp"

namespace fedsim {

enum class TransferKind { model, data };

struct TransferEvent {
    int src = 0;
    int dst = 0;
    std::int64_t bytes = 0;
    TransferKind kind = TransferKind::model;
};

// Ordered log of every transfer in one run. "Up" is bytes received by the
// federation server, "down" is bytes received by an agency (server downloads,
// relay hops and data exchange all land at an agency).
class TrafficLedger {
public:
    static constexpr int server_id = -1;

    void record_transfer(int src, int dst, std::int64_t bytes, TransferKind kind);

    const std::vector<TransferEvent>& events() const { return events_; }
    std::int64_t total_bytes() const { return up_ + down_; }
    std::int64_t bytes_up() const { return up_; }
    std::int64_t bytes_down() const { return down_; }

private:
    std::vector<TransferEvent> events_;
    std::int64_t up_ = 0;
    std::int64_t down_ = 0;
};

// How a run occupies the simulated wall clock.
enum class ComputeModel {
    parallel_clients,  // clients run simultaneously: transfer splits across A
                       // symmetric links, compute counts the busiest agency
    sequential,        // relay / centralized: transfers and compute add up
};

// Simulated duration of a run, in the cost model's time units. Data amounts
// are measured in units of unit_bytes (one unit = one shard of the split
// dataset). compute_units[i] is the amount agency i trained on, in the same
// units; for centralized runs the server's work is entry 0.
double simulated_time(const TrafficLedger& ledger, const CostParams& cp,
                      const std::vector<double>& compute_units, ComputeModel model,
                      double unit_bytes);

}  // namespace fedsim
