#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/matrix.hpp"

namespace fedsim {

// Labeled examples. Features are reals in [0,1] (pixels scaled by 1/255 when
// loaded from IDX files), labels are ints in [0, class_count).
struct Dataset {
    Matrix features;
    std::vector<int> labels;
    int class_count = 0;

    int size() const { return features.rows; }
    int dim() const { return features.cols; }

    // Raw size of one example for traffic accounting: one byte per feature
    // plus one label byte, matching the IDX representation.
    std::int64_t bytes_per_example() const { return static_cast<std::int64_t>(dim()) + 1; }
    std::int64_t total_bytes() const { return bytes_per_example() * size(); }

    void validate() const;  // throws std::invalid_argument
};

// An agency's local dataset: an index view into a shared global dataset.
// Never copies or mutates the underlying examples.
struct Shard {
    const Dataset* base = nullptr;
    std::vector<int> indices;

    int size() const { return static_cast<int>(indices.size()); }
    std::int64_t bytes() const { return base ? base->bytes_per_example() * size() : 0; }
};

// Disjoint assignment of example indices to agencies 0..A-1; the union
// covers the whole dataset.
struct PartitionPlan {
    std::vector<std::vector<int>> assignments;

    int agencies() const { return static_cast<int>(assignments.size()); }
};

// IDX binary container (big-endian): images magic 0x00000803 with dims
// [n, rows, cols] of unsigned bytes, labels magic 0x00000801 with dims [n].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const Dataset& data, const std::string& images_path, const std::string& labels_path);

// Isotropic Gaussian blobs (sigma 0.08) around per-class centers drawn in
// [0.2, 0.8]^dim, clamped to [0,1]. Exactly per_class examples per class,
// class-major order. Deterministic given the seed.
Dataset generate_synthetic(int classes, int per_class, int dim, std::uint64_t seed);

// Seeded shuffle dealt round-robin; agency sizes differ by at most one.
PartitionPlan partition_random(const Dataset& data, int agencies, std::uint64_t seed);

// Class c goes to agency c mod A; with A equal to the class count every
// agency holds exactly one class. Requires A <= class count.
PartitionPlan partition_by_class(const Dataset& data, int agencies);

// Shards exactly as assigned by the plan (no exchange).
std::vector<Shard> plan_shards(const Dataset& data, const PartitionPlan& plan);

// Each agency's shard plus, for every class, up to per_class examples drawn
// seeded and without replacement from that class's pool outside the agency's
// own shard. per_class = 0 returns the plan shards unchanged.
std::vector<Shard> apply_exchange(const Dataset& data, const PartitionPlan& plan, int per_class,
                                  std::uint64_t seed);

}  // namespace fedsim
