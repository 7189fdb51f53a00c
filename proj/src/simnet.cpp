#include "fedsim/simnet.hpp"

#include <algorithm>
#include <stdexcept>

namespace fedsim {

void TrafficLedger::record_transfer(int src, int dst, std::int64_t bytes, TransferKind kind) {
    if (bytes <= 0) throw std::invalid_argument("transfers must carry at least one byte");
    if (src == dst) throw std::invalid_argument("transfer endpoints must differ");
    events_.push_back(TransferEvent{src, dst, bytes, kind});
    if (dst == server_id)
        up_ += bytes;
    else
        down_ += bytes;
}

double simulated_time(const TrafficLedger& ledger, const CostParams& cp,
                      const std::vector<double>& compute_units, ComputeModel model,
                      double unit_bytes) {
    cp.validate();
    if (!(unit_bytes > 0.0)) throw std::invalid_argument("unit_bytes must be positive");
    for (double u : compute_units)
        if (!(u >= 0.0)) throw std::invalid_argument("compute units must be non-negative");

    const double transfer_units = static_cast<double>(ledger.total_bytes()) / unit_bytes;

    double transfer_time = 0.0;
    double compute_time = 0.0;
    switch (model) {
        case ComputeModel::parallel_clients:
            // Uplinks and downlinks of distinct agencies overlap: the wall
            // clock sees 1/A of the aggregate traffic plus the busiest trainer.
            transfer_time = cp.transfer_cost * transfer_units / static_cast<double>(cp.agencies);
            if (!compute_units.empty())
                compute_time =
                    cp.train_cost * *std::max_element(compute_units.begin(), compute_units.end());
            break;
        case ComputeModel::sequential:
            transfer_time = cp.transfer_cost * transfer_units;
            for (double u : compute_units) compute_time += cp.train_cost * u;
            break;
    }
    return transfer_time + compute_time;
}

}  // namespace fedsim
