#pragma once

#include <vector>

namespace fedsim {

// Analytical model of federated vs. centralized training time. transfer_cost
// is the time to move one unit of data over the network, train_cost the time
// to train on the same unit; their ratio is the relative network/compute
// performance. model_ratio is the serialized model size relative to the data
// it was trained on.
struct CostParams {
    double transfer_cost = 1.0;  // K_n
    double train_cost = 1.0;     // K_s
    int agencies = 1;            // A
    double model_ratio = 0.0;    // M_r

    double network_ratio() const { return transfer_cost / train_cost; }  // N

    void validate() const;  // throws std::invalid_argument
};

// (1 + N) / (1/A + M_r * N): how many times faster federated training is
// than collecting the data centrally. Values above 1 favor federation.
double time_ratio(const CostParams& cp);

// Limit of time_ratio as the model size becomes negligible: A * (1 + N).
double asymptotic_ratio(const CostParams& cp);

struct SweepRow {
    int agencies = 0;
    double network_ratio = 0.0;
    double ratio = 0.0;
};

// Dense (A, N) -> ratio table for plotting, rows ordered by (A, N).
std::vector<SweepRow> sweep_curve(const std::vector<double>& network_ratios,
                                  const std::vector<int>& agency_counts, double model_ratio);

}  // namespace fedsim
