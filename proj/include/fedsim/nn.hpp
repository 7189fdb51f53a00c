#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/matrix.hpp"

namespace fedsim {

struct Dataset;
struct Shard;

enum class HiddenActivation { relu };
enum class OutputActivation { softmax };

// Dense feedforward architecture: layer_sizes[0] is the input width, the
// last entry is the class count. Hidden layers use ReLU, the output layer
// softmax.
struct NetworkSpec {
    std::vector<int> layer_sizes;
    HiddenActivation hidden_activation = HiddenActivation::relu;
    OutputActivation output_activation = OutputActivation::softmax;

    int input_size() const { return layer_sizes.front(); }
    int class_count() const { return layer_sizes.back(); }

    // Sum over consecutive layer pairs of n_in*n_out weights + n_out biases.
    std::size_t param_count() const;

    // Identifier binding a ModelParams to this architecture.
    std::uint64_t hash() const;

    void validate() const;  // throws std::invalid_argument
};

// Flat parameter vector, layer by layer: weights (input-major, row-major)
// then biases. The unit that moves between agencies.
struct ModelParams {
    std::vector<double> values;
    std::uint64_t spec_hash = 0;
};

struct Batch {
    Matrix features;          // n x d, values in [0,1]
    std::vector<int> labels;  // n entries in [0, C)
};

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// Bookkeeping returned by train_local for traffic/time accounting.
struct TrainInfo {
    std::int64_t examples_seen = 0;
    int effective_batch_size = 0;
    bool batch_clamped = false;
};

// Glorot-style uniform weights in +-sqrt(6/(n_in+n_out)), zero biases.
ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed);

// Class probabilities, one row per input row. Rows sum to 1.
Matrix forward(const ModelParams& params, const NetworkSpec& spec, const Matrix& features);

// Mean cross-entropy over the batch and its gradient in the flat layout.
// Probabilities are clamped at 1e-12 before the log.
LossGrad loss_and_grad(const ModelParams& params, const NetworkSpec& spec, const Batch& batch);

// values' = values - lr * grad. Non-finite gradient entries are rejected.
ModelParams sgd_step(const ModelParams& params, const std::vector<double>& grad, double lr);

// Exactly `steps` SGD steps on mini-batches drawn without replacement per
// epoch, reshuffling at each epoch boundary. A batch_size larger than the
// shard is clamped (recorded in TrainInfo and `warnings` when given).
// Deterministic given the seed and the shard's index set.
ModelParams train_local(const ModelParams& params, const NetworkSpec& spec, const Shard& shard,
                        int steps, int batch_size, double lr, std::uint64_t seed,
                        TrainInfo* info = nullptr, std::vector<std::string>* warnings = nullptr);
ModelParams train_local(const ModelParams& params, const NetworkSpec& spec, const Dataset& data,
                        int steps, int batch_size, double lr, std::uint64_t seed,
                        TrainInfo* info = nullptr, std::vector<std::string>* warnings = nullptr);

// Accuracy (argmax, ties to the lowest class index) and mean loss.
EvalResult evaluate(const ModelParams& params, const NetworkSpec& spec, const Dataset& data);
EvalResult evaluate(const ModelParams& params, const NetworkSpec& spec, const Shard& shard);

// Weighted mean of parameter vectors, accumulated in the order given
// (callers pass ascending agency id so results are bit-deterministic).
ModelParams average_params(const std::vector<ModelParams>& entries, const std::vector<double>& weights);

}  // namespace fedsim
