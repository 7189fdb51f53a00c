#include "fedsim/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

constexpr std::uint64_t kDataStream = 3;

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(const std::string& name, int line, const std::string& message) {
    throw ConfigError(name + ":" + std::to_string(line) + ": " + message);
}

long long parse_int(const std::string& name, int line, const std::string& key,
                    const std::string& value) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(name, line, "invalid integer for '" + key + "': '" + value + "'");
    }
}

double parse_real(const std::string& name, int line, const std::string& key,
                  const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        fail(name, line, "invalid number for '" + key + "': '" + value + "'");
    }
}

std::vector<int> parse_layers(const std::string& name, int line, const std::string& value) {
    std::vector<int> sizes;
    std::stringstream ss(value);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        piece = trim(piece);
        if (piece.empty()) fail(name, line, "invalid layer list '" + value + "'");
        sizes.push_back(static_cast<int>(parse_int(name, line, "layers", piece)));
    }
    if (sizes.size() < 2) fail(name, line, "layer list needs at least input and output sizes");
    return sizes;
}

ExperimentFile parse_lines(std::istream& in, const std::string& name) {
    ExperimentFile file;
    std::set<std::string> seen;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string text = trim(raw);
        if (text.empty() || text[0] == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) fail(name, line, "expected key = value, got '" + text + "'");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) fail(name, line, "missing key before '='");
        if (value.empty()) fail(name, line, "missing value for '" + key + "'");
        if (!seen.insert(key).second) fail(name, line, "duplicate key '" + key + "'");

        FederationConfig& fed = file.federation;
        if (key == "flavor") {
            if (value == "centralized")
                fed.flavor = Flavor::centralized;
            else if (value == "flavor1")
                fed.flavor = Flavor::flavor1;
            else if (value == "flavor2")
                fed.flavor = Flavor::flavor2;
            else
                fail(name, line, "flavor must be centralized, flavor1 or flavor2, got '" + value + "'");
        } else if (key == "agencies") {
            fed.agencies = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "partition") {
            if (value == "random")
                fed.partition = PartitionMode::random;
            else if (value == "by_class")
                fed.partition = PartitionMode::by_class;
            else
                fail(name, line, "partition must be random or by_class, got '" + value + "'");
        } else if (key == "exchange_per_class") {
            fed.exchange_per_class = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "rounds") {
            fed.rounds = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "passes") {
            fed.passes = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "local_steps") {
            fed.local_steps = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "epochs_per_visit") {
            fed.epochs_per_visit = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "batch_size") {
            fed.batch_size = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "lr") {
            fed.lr = parse_real(name, line, key, value);
        } else if (key == "seed") {
            fed.seed = static_cast<std::uint64_t>(parse_int(name, line, key, value));
        } else if (key == "layers") {
            fed.network.layer_sizes = parse_layers(name, line, value);
            file.layers_given = true;
        } else if (key == "model_bytes") {
            fed.model_bytes = parse_int(name, line, key, value);
        } else if (key == "k_n") {
            fed.transfer_cost = parse_real(name, line, key, value);
        } else if (key == "k_s") {
            fed.train_cost = parse_real(name, line, key, value);
        } else if (key == "weighting") {
            if (value == "equal")
                fed.weighting = AveragingWeights::equal;
            else if (value == "data_size")
                fed.weighting = AveragingWeights::data_size;
            else
                fail(name, line, "weighting must be equal or data_size, got '" + value + "'");
        } else if (key == "threads") {
            fed.threads = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "dataset") {
            if (value != "synthetic" && value != "idx")
                fail(name, line, "dataset must be synthetic or idx, got '" + value + "'");
            file.dataset = value;
        } else if (key == "classes") {
            file.synthetic.classes = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "per_class") {
            file.synthetic.per_class = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "dim") {
            file.synthetic.dim = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "test_per_class") {
            file.synthetic.test_per_class = static_cast<int>(parse_int(name, line, key, value));
        } else if (key == "train_images") {
            file.train_images = value;
        } else if (key == "train_labels") {
            file.train_labels = value;
        } else if (key == "test_images") {
            file.test_images = value;
        } else if (key == "test_labels") {
            file.test_labels = value;
        } else if (key == "output_dir") {
            file.output_dir = value;
        } else {
            fail(name, line, "unknown key '" + key + "'");
        }
    }

    if (file.dataset == "idx") {
        if (file.train_images.empty() || file.train_labels.empty() || file.test_images.empty() ||
            file.test_labels.empty())
            fail(name, line,
                 "dataset = idx needs train_images, train_labels, test_images and test_labels");
    }
    return file;
}

std::string resolve(const std::filesystem::path& base, const std::string& given) {
    std::filesystem::path p(given);
    if (p.is_absolute()) return p.string();
    return (base / p).string();
}

}  // namespace

ExperimentFile parse_experiment_text(const std::string& text, const std::string& name) {
    std::istringstream in(text);
    return parse_lines(in, name);
}

ExperimentFile parse_experiment_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    ExperimentFile file = parse_lines(in, path);

    const std::filesystem::path base = std::filesystem::path(path).parent_path();
    if (!file.train_images.empty()) file.train_images = resolve(base, file.train_images);
    if (!file.train_labels.empty()) file.train_labels = resolve(base, file.train_labels);
    if (!file.test_images.empty()) file.test_images = resolve(base, file.test_images);
    if (!file.test_labels.empty()) file.test_labels = resolve(base, file.test_labels);
    file.output_dir = resolve(base, file.output_dir);
    return file;
}

LoadedData make_synthetic_split(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.test_per_class < 1) throw std::invalid_argument("test_per_class must be positive");
    const int block = spec.per_class + spec.test_per_class;
    const Dataset full =
        generate_synthetic(spec.classes, block, spec.dim, mix_seed(seed, kDataStream));

    LoadedData out;
    out.train.class_count = spec.classes;
    out.train.features = Matrix(spec.classes * spec.per_class, spec.dim);
    out.train.labels.resize(static_cast<std::size_t>(spec.classes) * spec.per_class);
    out.test.class_count = spec.classes;
    out.test.features = Matrix(spec.classes * spec.test_per_class, spec.dim);
    out.test.labels.resize(static_cast<std::size_t>(spec.classes) * spec.test_per_class);

    int train_row = 0, test_row = 0;
    for (int c = 0; c < spec.classes; ++c) {
        for (int i = 0; i < block; ++i) {
            const int src = c * block + i;
            if (i < spec.per_class) {
                std::copy(full.features.row(src), full.features.row(src) + spec.dim,
                          out.train.features.row(train_row));
                out.train.labels[train_row] = c;
                ++train_row;
            } else {
                std::copy(full.features.row(src), full.features.row(src) + spec.dim,
                          out.test.features.row(test_row));
                out.test.labels[test_row] = c;
                ++test_row;
            }
        }
    }
    return out;
}

LoadedData prepare_data(ExperimentFile& file) {
    LoadedData data;
    if (file.dataset == "synthetic") {
        data = make_synthetic_split(file.synthetic, file.federation.seed);
    } else {
        data.train = load_idx(file.train_images, file.train_labels);
        data.test = load_idx(file.test_images, file.test_labels);
    }
    if (!file.layers_given)
        file.federation.network.layer_sizes = {data.train.dim(), 128, data.train.class_count};
    return data;
}

FederationConfig synthetic_preset(Flavor flavor) {
    FederationConfig config;
    config.flavor = flavor;
    config.agencies = 10;
    config.rounds = 50;
    config.local_steps = 50;
    config.epochs_per_visit = 3;
    config.batch_size = 8;
    config.lr = 0.1;
    config.seed = 42;
    config.network.layer_sizes = {10, 10, 10};
    return config;
}

FederationConfig mnist_preset(Flavor flavor) {
    FederationConfig config;
    config.flavor = flavor;
    config.agencies = 10;
    config.rounds = 50;
    config.local_steps = 46;
    config.epochs_per_visit = 3;
    config.batch_size = 128;
    config.lr = 0.1;
    config.seed = 42;
    config.network.layer_sizes = {784, 128, 10};
    return config;
}

std::string format_number(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return buffer;
}

void write_rounds_csv(const std::string& path, const std::vector<RoundRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "round,accuracy,loss,bytes_up,bytes_down,sim_time\n";
    for (const RoundRecord& r : records)
        out << r.round << ',' << format_number(r.accuracy) << ',' << format_number(r.loss) << ','
            << r.bytes_up << ',' << r.bytes_down << ',' << format_number(r.sim_time) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

void write_summary_csv(const std::string& path, const RunResult& result) {
    if (result.records.empty()) throw std::invalid_argument("run produced no records");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "final_accuracy,total_bytes,sim_time\n";
    const RoundRecord& last = result.records.back();
    out << format_number(last.accuracy) << ',' << result.ledger.total_bytes() << ','
        << format_number(last.sim_time) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace fedsim
