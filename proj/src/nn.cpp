#include "fedsim/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fedsim/data.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

constexpr double kProbFloor = 1e-12;

// Z = X * W + b, with W stored input-major (in x out).
void affine(const Matrix& x, const double* w, const double* b, Matrix& z) {
    const int n = x.rows, in = x.cols, out = z.cols;
    for (int i = 0; i < n; ++i) {
        double* zi = z.row(i);
        for (int j = 0; j < out; ++j) zi[j] = b[j];
        const double* xi = x.row(i);
        for (int k = 0; k < in; ++k) {
            const double xik = xi[k];
            if (xik == 0.0) continue;
            const double* wk = w + static_cast<std::size_t>(k) * out;
            for (int j = 0; j < out; ++j) zi[j] += xik * wk[j];
        }
    }
}

void relu_inplace(Matrix& z) {
    for (double& v : z.data) v = v > 0.0 ? v : 0.0;
}

void softmax_rows_inplace(Matrix& z) {
    for (int i = 0; i < z.rows; ++i) {
        double* zi = z.row(i);
        double m = zi[0];
        for (int j = 1; j < z.cols; ++j) m = std::max(m, zi[j]);
        double sum = 0.0;
        for (int j = 0; j < z.cols; ++j) {
            zi[j] = std::exp(zi[j] - m);
            sum += zi[j];
        }
        for (int j = 0; j < z.cols; ++j) zi[j] /= sum;
    }
}

void check_bound(const ModelParams& params, const NetworkSpec& spec) {
    if (params.spec_hash != spec.hash())
        throw std::invalid_argument("model params are bound to a different network spec");
    if (params.values.size() != spec.param_count())
        throw std::invalid_argument("model params length " + std::to_string(params.values.size()) +
                                    " does not match spec parameter count " +
                                    std::to_string(spec.param_count()));
}

// Activations of every layer, input excluded.
std::vector<Matrix> forward_cached(const ModelParams& params, const NetworkSpec& spec,
                                   const Matrix& features) {
    const auto& sizes = spec.layer_sizes;
    const int layers = static_cast<int>(sizes.size()) - 1;
    std::vector<Matrix> acts;
    acts.reserve(layers);
    const double* p = params.values.data();
    const Matrix* prev = &features;
    for (int l = 0; l < layers; ++l) {
        const int in = sizes[l], out = sizes[l + 1];
        Matrix z(features.rows, out);
        affine(*prev, p, p + static_cast<std::size_t>(in) * out, z);
        p += static_cast<std::size_t>(in) * out + out;
        if (l + 1 == layers)
            softmax_rows_inplace(z);
        else
            relu_inplace(z);
        acts.push_back(std::move(z));
        prev = &acts.back();
    }
    return acts;
}

int argmax_row(const double* row, int cols) {
    int best = 0;
    for (int j = 1; j < cols; ++j)
        if (row[j] > row[best]) best = j;  // strict: ties keep the lowest index
    return best;
}

}  // namespace

std::size_t NetworkSpec::param_count() const {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        total += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1] + layer_sizes[l + 1];
    return total;
}

std::uint64_t NetworkSpec::hash() const {
    // FNV-1a over the layer sizes and activation tags
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    feed(layer_sizes.size());
    for (int s : layer_sizes) feed(static_cast<std::uint64_t>(s));
    feed(static_cast<std::uint64_t>(hidden_activation));
    feed(static_cast<std::uint64_t>(output_activation));
    return h;
}

void NetworkSpec::validate() const {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("network needs at least an input and an output layer");
    for (int s : layer_sizes)
        if (s < 1) throw std::invalid_argument("layer sizes must be positive");
}

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelParams params;
    params.spec_hash = spec.hash();
    params.values.resize(spec.param_count());
    Rng rng(seed);
    double* p = params.values.data();
    const auto& sizes = spec.layer_sizes;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const std::size_t in = sizes[l], out = sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        for (std::size_t i = 0; i < in * out; ++i) *p++ = rng.uniform(-bound, bound);
        for (std::size_t i = 0; i < out; ++i) *p++ = 0.0;  // biases
    }
    return params;
}

Matrix forward(const ModelParams& params, const NetworkSpec& spec, const Matrix& features) {
    spec.validate();
    check_bound(params, spec);
    if (features.cols != spec.input_size())
        throw std::invalid_argument("feature width " + std::to_string(features.cols) +
                                    " does not match network input size " +
                                    std::to_string(spec.input_size()));
    auto acts = forward_cached(params, spec, features);
    return std::move(acts.back());
}

LossGrad loss_and_grad(const ModelParams& params, const NetworkSpec& spec, const Batch& batch) {
    spec.validate();
    check_bound(params, spec);
    const int n = batch.features.rows;
    const int classes = spec.class_count();
    if (n < 1) throw std::invalid_argument("batch is empty");
    if (batch.features.cols != spec.input_size())
        throw std::invalid_argument("batch feature width does not match network input size");
    if (static_cast<int>(batch.labels.size()) != n)
        throw std::invalid_argument("batch label count does not match feature rows");
    for (int y : batch.labels)
        if (y < 0 || y >= classes) throw std::invalid_argument("batch label out of range");

    auto acts = forward_cached(params, spec, batch.features);
    const Matrix& probs = acts.back();

    LossGrad out;
    out.grad.assign(params.values.size(), 0.0);
    for (int i = 0; i < n; ++i)
        out.loss -= std::log(std::max(probs.at(i, batch.labels[i]), kProbFloor));
    out.loss /= n;

    // delta of the softmax/cross-entropy head: (p - onehot) / n
    const auto& sizes = spec.layer_sizes;
    const int layers = static_cast<int>(sizes.size()) - 1;
    Matrix delta = probs;
    for (int i = 0; i < n; ++i) delta.at(i, batch.labels[i]) -= 1.0;
    for (double& v : delta.data) v /= n;

    // layer offsets into the flat layout
    std::vector<std::size_t> offsets(layers);
    std::size_t off = 0;
    for (int l = 0; l < layers; ++l) {
        offsets[l] = off;
        off += static_cast<std::size_t>(sizes[l]) * sizes[l + 1] + sizes[l + 1];
    }

    for (int l = layers - 1; l >= 0; --l) {
        const int in = sizes[l], out_w = sizes[l + 1];
        const Matrix& input = (l == 0) ? batch.features : acts[l - 1];
        double* dw = out.grad.data() + offsets[l];
        double* db = dw + static_cast<std::size_t>(in) * out_w;
        for (int i = 0; i < n; ++i) {
            const double* di = delta.row(i);
            const double* xi = input.row(i);
            for (int k = 0; k < in; ++k) {
                const double xik = xi[k];
                if (xik == 0.0) continue;
                double* dwk = dw + static_cast<std::size_t>(k) * out_w;
                for (int j = 0; j < out_w; ++j) dwk[j] += xik * di[j];
            }
            for (int j = 0; j < out_w; ++j) db[j] += di[j];
        }
        if (l > 0) {
            // delta_prev = (delta * W^T) masked by the ReLU
            const double* w = params.values.data() + offsets[l];
            Matrix prev_delta(n, in);
            for (int i = 0; i < n; ++i) {
                const double* di = delta.row(i);
                const double* ai = acts[l - 1].row(i);
                double* pi = prev_delta.row(i);
                for (int k = 0; k < in; ++k) {
                    if (ai[k] <= 0.0) { pi[k] = 0.0; continue; }
                    const double* wk = w + static_cast<std::size_t>(k) * out_w;
                    double s = 0.0;
                    for (int j = 0; j < out_w; ++j) s += di[j] * wk[j];
                    pi[k] = s;
                }
            }
            delta = std::move(prev_delta);
        }
    }
    return out;
}

ModelParams sgd_step(const ModelParams& params, const std::vector<double>& grad, double lr) {
    if (grad.size() != params.values.size())
        throw std::invalid_argument("gradient length does not match parameter count");
    if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
    for (double g : grad)
        if (!std::isfinite(g)) throw std::invalid_argument("gradient has non-finite entries");
    ModelParams next = params;
    for (std::size_t i = 0; i < grad.size(); ++i) next.values[i] -= lr * grad[i];
    return next;
}

ModelParams train_local(const ModelParams& params, const NetworkSpec& spec, const Shard& shard,
                        int steps, int batch_size, double lr, std::uint64_t seed, TrainInfo* info,
                        std::vector<std::string>* warnings) {
    spec.validate();
    check_bound(params, spec);
    if (info) *info = TrainInfo{};
    const int n = shard.size();
    if (n < 1) throw std::invalid_argument("train_local requires a non-empty dataset");
    if (steps < 0) throw std::invalid_argument("step count must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
    const Dataset& base = *shard.base;

    int b = batch_size;
    if (b > n) {
        b = n;
        if (warnings)
            warnings->push_back("batch_size " + std::to_string(batch_size) + " clamped to dataset size " +
                                std::to_string(n));
        if (info) info->batch_clamped = true;
    }
    if (info) info->effective_batch_size = b;

    ModelParams current = params;
    if (steps == 0) return current;

    // Canonical local ordering: the index set, sorted, then shuffled by the
    // seed. Training depends only on the set of examples, not on how the
    // caller happened to order them.
    std::vector<int> order = shard.indices;
    std::sort(order.begin(), order.end());
    Rng rng(seed);
    rng.shuffle(order);

    const int d = base.dim();
    Batch batch;
    int pos = 0;
    for (int step = 0; step < steps; ++step) {
        if (pos >= n) {  // epoch boundary
            rng.shuffle(order);
            pos = 0;
        }
        const int m = std::min(b, n - pos);
        batch.features = Matrix(m, d);
        batch.labels.resize(m);
        for (int i = 0; i < m; ++i) {
            const int src = order[pos + i];
            std::memcpy(batch.features.row(i), base.features.row(src), sizeof(double) * d);
            batch.labels[i] = base.labels[src];
        }
        pos += m;
        if (info) info->examples_seen += m;

        LossGrad lg = loss_and_grad(current, spec, batch);
        for (double g : lg.grad)
            if (!std::isfinite(g)) throw std::runtime_error("gradient diverged to a non-finite value");
        for (std::size_t i = 0; i < lg.grad.size(); ++i) current.values[i] -= lr * lg.grad[i];
    }
    return current;
}

ModelParams train_local(const ModelParams& params, const NetworkSpec& spec, const Dataset& data,
                        int steps, int batch_size, double lr, std::uint64_t seed, TrainInfo* info,
                        std::vector<std::string>* warnings) {
    Shard all{&data, std::vector<int>(data.size())};
    std::iota(all.indices.begin(), all.indices.end(), 0);
    return train_local(params, spec, all, steps, batch_size, lr, seed, info, warnings);
}

EvalResult evaluate(const ModelParams& params, const NetworkSpec& spec, const Shard& shard) {
    spec.validate();
    check_bound(params, spec);
    const int n = shard.size();
    if (n < 1) throw std::invalid_argument("evaluate requires a non-empty dataset");
    const Dataset& base = *shard.base;
    const int d = base.dim();

    constexpr int kChunk = 512;
    Matrix chunk_features;
    EvalResult result;
    std::int64_t correct = 0;
    double loss_sum = 0.0;
    for (int start = 0; start < n; start += kChunk) {
        const int m = std::min(kChunk, n - start);
        chunk_features = Matrix(m, d);
        for (int i = 0; i < m; ++i)
            std::memcpy(chunk_features.row(i), base.features.row(shard.indices[start + i]),
                        sizeof(double) * d);
        Matrix probs = forward(params, spec, chunk_features);
        for (int i = 0; i < m; ++i) {
            const int label = base.labels[shard.indices[start + i]];
            if (argmax_row(probs.row(i), probs.cols) == label) ++correct;
            loss_sum -= std::log(std::max(probs.at(i, label), kProbFloor));
        }
    }
    result.accuracy = static_cast<double>(correct) / n;
    result.mean_loss = loss_sum / n;
    return result;
}

EvalResult evaluate(const ModelParams& params, const NetworkSpec& spec, const Dataset& data) {
    Shard all{&data, std::vector<int>(data.size())};
    std::iota(all.indices.begin(), all.indices.end(), 0);
    return evaluate(params, spec, all);
}

ModelParams average_params(const std::vector<ModelParams>& entries, const std::vector<double>& weights) {
    if (entries.empty()) throw std::invalid_argument("average_params needs at least one entry");
    if (entries.size() != weights.size())
        throw std::invalid_argument("entry and weight counts differ");
    const std::uint64_t hash = entries.front().spec_hash;
    const std::size_t len = entries.front().values.size();
    double weight_sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) throw std::invalid_argument("averaging weights must be positive");
        weight_sum += w;
    }
    ModelParams out;
    out.spec_hash = hash;
    out.values.assign(len, 0.0);
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const ModelParams& e = entries[k];
        if (e.spec_hash != hash || e.values.size() != len)
            throw std::invalid_argument("cannot average params bound to different specs");
        const double w = weights[k];
        for (std::size_t i = 0; i < len; ++i) out.values[i] += w * e.values[i];
    }
    for (double& v : out.values) v /= weight_sum;
    return out;
}

}  // namespace fedsim
