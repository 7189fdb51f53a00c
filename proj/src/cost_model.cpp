#include "fedsim/cost_model.hpp"

#include <cmath>
#include <stdexcept>

namespace fedsim {

void CostParams::validate() const {
    if (!(transfer_cost >= 0.0) || !std::isfinite(transfer_cost))
        throw std::invalid_argument("transfer cost K_n must be non-negative and finite");
    if (!(train_cost > 0.0) || !std::isfinite(train_cost))
        throw std::invalid_argument("training cost K_s must be positive and finite");
    if (agencies < 1) throw std::invalid_argument("agency count must be at least one");
    if (!(model_ratio >= 0.0) || !std::isfinite(model_ratio))
        throw std::invalid_argument("model ratio M_r must be non-negative and finite");
}

double time_ratio(const CostParams& p) {
    p.validate();
    const double n = p.network_ratio();
    const double a = static_cast<double>(p.agencies);
    const double denom = 1.0 / a + p.model_ratio * n;
    return (1.0 + n) / denom;
}

double asymptotic_ratio(const CostParams& p) {
    p.validate();
    return static_cast<double>(p.agencies) * (1.0 + p.network_ratio());
}

std::vector<SweepRow> sweep_curve(const std::vector<double>& network_ratios,
                                  const std::vector<int>& agency_counts, double model_ratio) {
    std::vector<SweepRow> rows;
    rows.reserve(network_ratios.size() * agency_counts.size());
    for (int a : agency_counts) {
        for (double n : network_ratios) {
            if (!(n >= 0.0)) throw std::invalid_argument("network ratio values must be non-negative");
            CostParams p{n, 1.0, a, model_ratio};
            rows.push_back(SweepRow{a, n, time_ratio(p)});
        }
    }
    return rows;
}

}  // namespace fedsim
