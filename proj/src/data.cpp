#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw std::runtime_error("idx: truncated file: " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

std::uint64_t exchange_draw_seed(std::uint64_t seed, int agency, int cls) {
    return mix_seed(seed, static_cast<std::uint64_t>(agency), static_cast<std::uint64_t>(cls));
}

}  // namespace

void Dataset::validate() const {
    if (size() < 1) throw std::invalid_argument("dataset is empty");
    if (static_cast<int>(labels.size()) != size())
        throw std::invalid_argument("label count does not match feature rows");
    if (class_count < 1) throw std::invalid_argument("dataset needs at least one class");
    for (int y : labels)
        if (y < 0 || y >= class_count) throw std::invalid_argument("dataset label out of range");
    for (double v : features.data)
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("feature values must lie in [0,1]");
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

    const std::uint32_t img_magic = read_u32_be(img, images_path);
    if (img_magic != kImagesMagic)
        throw std::runtime_error("idx: bad magic in " + images_path + " (expected 0x00000803)");
    const std::uint32_t n_images = read_u32_be(img, images_path);
    const std::uint32_t rows = read_u32_be(img, images_path);
    const std::uint32_t cols = read_u32_be(img, images_path);

    const std::uint32_t lab_magic = read_u32_be(lab, labels_path);
    if (lab_magic != kLabelsMagic)
        throw std::runtime_error("idx: bad magic in " + labels_path + " (expected 0x00000801)");
    const std::uint32_t n_labels = read_u32_be(lab, labels_path);

    if (n_images != n_labels)
        throw std::runtime_error("idx: count mismatch: " + images_path + " has " +
                                 std::to_string(n_images) + " images but " + labels_path + " has " +
                                 std::to_string(n_labels) + " labels");
    if (n_images == 0) throw std::runtime_error("idx: empty dataset in " + images_path);

    const std::size_t dim = static_cast<std::size_t>(rows) * cols;
    Dataset data;
    data.features = Matrix(static_cast<int>(n_images), static_cast<int>(dim));

    std::vector<unsigned char> pixel_row(dim);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(pixel_row.data()), static_cast<std::streamsize>(dim)))
            throw std::runtime_error("idx: truncated file: " + images_path);
        double* out = data.features.row(static_cast<int>(i));
        for (std::size_t j = 0; j < dim; ++j) out[j] = pixel_row[j] / 255.0;
    }

    data.labels.resize(n_labels);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n_labels; ++i) {
        unsigned char y;
        if (!lab.read(reinterpret_cast<char*>(&y), 1))
            throw std::runtime_error("idx: truncated file: " + labels_path);
        data.labels[i] = y;
        max_label = std::max(max_label, static_cast<int>(y));
    }
    data.class_count = max_label + 1;
    return data;
}

void write_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path) {
    data.validate();
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("idx: cannot open " + images_path + " for writing");
    // Features are written as one row of d pixels per example (rows = d, cols = 1).
    write_u32_be(img, kImagesMagic);
    write_u32_be(img, static_cast<std::uint32_t>(data.size()));
    write_u32_be(img, static_cast<std::uint32_t>(data.dim()));
    write_u32_be(img, 1);
    std::vector<unsigned char> pixel_row(data.dim());
    for (int i = 0; i < data.size(); ++i) {
        const double* row = data.features.row(i);
        for (int j = 0; j < data.dim(); ++j)
            pixel_row[j] = static_cast<unsigned char>(std::lround(row[j] * 255.0));
        img.write(reinterpret_cast<const char*>(pixel_row.data()), data.dim());
    }

    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("idx: cannot open " + labels_path + " for writing");
    write_u32_be(lab, kLabelsMagic);
    write_u32_be(lab, static_cast<std::uint32_t>(data.size()));
    for (int y : data.labels) {
        unsigned char b = static_cast<unsigned char>(y);
        lab.write(reinterpret_cast<const char*>(&b), 1);
    }
}

Dataset generate_synthetic(int classes, int per_class, int dim, std::uint64_t seed) {
    if (classes < 2) throw std::invalid_argument("synthetic data needs at least two classes");
    if (per_class < 1) throw std::invalid_argument("per_class must be positive");
    if (dim < 1) throw std::invalid_argument("dim must be positive");

    constexpr double kSigma = 0.08;
    Rng rng(seed);

    std::vector<double> centers(static_cast<std::size_t>(classes) * dim);
    for (double& c : centers) c = rng.uniform(0.2, 0.8);

    Dataset data;
    data.class_count = classes;
    data.features = Matrix(classes * per_class, dim);
    data.labels.resize(static_cast<std::size_t>(classes) * per_class);
    int row = 0;
    for (int c = 0; c < classes; ++c) {
        const double* center = centers.data() + static_cast<std::size_t>(c) * dim;
        for (int i = 0; i < per_class; ++i, ++row) {
            double* out = data.features.row(row);
            for (int j = 0; j < dim; ++j)
                out[j] = std::clamp(center[j] + rng.normal(0.0, kSigma), 0.0, 1.0);
            data.labels[row] = c;
        }
    }
    return data;
}

PartitionPlan partition_random(const Dataset& data, int agencies, std::uint64_t seed) {
    const int n = data.size();
    if (agencies < 1) throw std::invalid_argument("agency count must be positive");
    if (agencies > n)
        throw std::invalid_argument("cannot split " + std::to_string(n) + " examples across " +
                                    std::to_string(agencies) + " agencies");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    PartitionPlan plan;
    plan.assignments.resize(agencies);
    for (int a = 0; a < agencies; ++a) plan.assignments[a].reserve(n / agencies + 1);
    for (int i = 0; i < n; ++i) plan.assignments[i % agencies].push_back(order[i]);
    return plan;
}

PartitionPlan partition_by_class(const Dataset& data, int agencies) {
    if (agencies < 1) throw std::invalid_argument("agency count must be positive");
    if (agencies > data.class_count)
        throw std::invalid_argument("class-pure split impossible: " + std::to_string(agencies) +
                                    " agencies but only " + std::to_string(data.class_count) +
                                    " classes");
    PartitionPlan plan;
    plan.assignments.resize(agencies);
    for (int i = 0; i < data.size(); ++i)
        plan.assignments[data.labels[i] % agencies].push_back(i);
    for (int a = 0; a < agencies; ++a)
        if (plan.assignments[a].empty())
            throw std::invalid_argument("agency " + std::to_string(a) +
                                        " would receive no examples (empty class)");
    return plan;
}

std::vector<Shard> plan_shards(const Dataset& data, const PartitionPlan& plan) {
    std::vector<Shard> shards(plan.agencies());
    for (int a = 0; a < plan.agencies(); ++a) shards[a] = Shard{&data, plan.assignments[a]};
    return shards;
}

std::vector<Shard> apply_exchange(const Dataset& data, const PartitionPlan& plan, int per_class,
                                  std::uint64_t seed) {
    if (per_class < 0) throw std::invalid_argument("exchange amount must be non-negative");
    std::vector<Shard> shards = plan_shards(data, plan);
    if (per_class == 0) return shards;

    std::vector<std::vector<int>> class_pool(data.class_count);
    for (int i = 0; i < data.size(); ++i) class_pool[data.labels[i]].push_back(i);
    for (int c = 0; c < data.class_count; ++c)
        if (per_class > static_cast<int>(class_pool[c].size()))
            throw std::invalid_argument("exchange of " + std::to_string(per_class) +
                                        " per class exceeds class " + std::to_string(c) + " size " +
                                        std::to_string(class_pool[c].size()));

    std::vector<char> in_shard(data.size());
    for (int a = 0; a < plan.agencies(); ++a) {
        std::fill(in_shard.begin(), in_shard.end(), 0);
        for (int idx : plan.assignments[a]) in_shard[idx] = 1;

        for (int c = 0; c < data.class_count; ++c) {
            // donors come from the class pool outside this agency's shard
            std::vector<int> pool;
            pool.reserve(class_pool[c].size());
            for (int idx : class_pool[c])
                if (!in_shard[idx]) pool.push_back(idx);
            const int take = std::min<int>(per_class, static_cast<int>(pool.size()));
            if (take == 0) continue;
            Rng rng(exchange_draw_seed(seed, a, c));
            // partial Fisher-Yates: the first `take` entries are the draw
            for (int i = 0; i < take; ++i) {
                const int j = i + static_cast<int>(rng.bounded(pool.size() - i));
                std::swap(pool[i], pool[j]);
                shards[a].indices.push_back(pool[i]);
            }
        }
    }
    return shards;
}

}  // namespace fedsim
