#include "cliloop/datasets.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cliloop/losses.hpp"
#include "cliloop/optimizer.hpp"
#include "cliloop/rng.hpp"

namespace cliloop {

namespace {

Vector random_unit_vector(Rng& rng, std::size_t dim) {
    Vector v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (double& x : v) {
            x = rng.normal();
            norm += x * x;
        }
        norm = std::sqrt(norm);
    } while (norm < 1e-9);
    for (double& x : v) x /= norm;
    return v;
}

LabeledDataset sample_split(const GeneratorSpec& spec, const std::vector<Vector>& class_means,
                            int per_class, std::uint64_t seed) {
    const auto c_total = static_cast<std::size_t>(spec.class_count());
    const auto dim = static_cast<std::size_t>(spec.dim);
    LabeledDataset out;
    out.class_count = spec.class_count();
    out.features = Matrix(c_total * static_cast<std::size_t>(per_class), dim);
    out.labels.reserve(out.features.rows());
    out.superclass_map.resize(c_total);
    for (std::size_t c = 0; c < c_total; ++c)
        out.superclass_map[c] = static_cast<int>(c) / spec.subclasses_per;

    Rng rng(seed);
    std::size_t row = 0;
    for (std::size_t c = 0; c < c_total; ++c) {
        for (int i = 0; i < per_class; ++i, ++row) {
            double* dst = out.features.row_ptr(row);
            const Vector& mean = class_means[c];
            for (std::size_t k = 0; k < dim; ++k)
                dst[k] = mean[k] + spec.noise_sigma * rng.normal();
            out.labels.push_back(static_cast<int>(c));
        }
    }
    return out;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> generate_finegrained(const GeneratorSpec& spec) {
    if (spec.superclasses < 1 || spec.subclasses_per < 1 || spec.class_count() < 2)
        throw std::invalid_argument("generate_finegrained: need at least two classes");
    if (spec.dim < 1) throw std::invalid_argument("generate_finegrained: dim must be positive");
    if (spec.per_class_train < 1 || spec.per_class_test < 1)
        throw std::invalid_argument("generate_finegrained: per-class counts must be positive");
    if (!(spec.inter_spread > spec.intra_spread) || !(spec.intra_spread > 0.0))
        throw std::invalid_argument("generate_finegrained: need inter_spread > intra_spread > 0");
    if (spec.noise_sigma <= 0.0)
        throw std::invalid_argument("generate_finegrained: noise_sigma must be positive");

    const auto dim = static_cast<std::size_t>(spec.dim);
    Rng mean_rng(derive_seed(spec.seed, "means"));

    // Superclass centers on a sphere of radius inter_spread / sqrt(2):
    // random directions there sit at pairwise distance ~inter_spread.
    const double radius = spec.inter_spread / std::sqrt(2.0);
    std::vector<Vector> class_means;
    class_means.reserve(static_cast<std::size_t>(spec.class_count()));
    for (int s = 0; s < spec.superclasses; ++s) {
        Vector super_mean = random_unit_vector(mean_rng, dim);
        for (double& x : super_mean) x *= radius;

        for (int j = 0; j < spec.subclasses_per; ++j) {
            Vector offset = random_unit_vector(mean_rng, dim);
            Vector mean(dim);
            for (std::size_t k = 0; k < dim; ++k)
                mean[k] = super_mean[k] + spec.intra_spread * offset[k];
            class_means.push_back(std::move(mean));
        }
    }

    LabeledDataset train = sample_split(spec, class_means, spec.per_class_train,
                                        derive_seed(spec.seed, "train"));
    LabeledDataset test = sample_split(spec, class_means, spec.per_class_test,
                                       derive_seed(spec.seed, "test"));
    return {std::move(train), std::move(test)};
}

CorruptionKind corruption_kind_from_string(const std::string& name) {
    if (name == "gaussian_noise") return CorruptionKind::gaussian_noise;
    throw std::invalid_argument("unknown corruption kind: " + name);
}

const double kSeverityUnitSigma = 0.50;

LabeledDataset corrupt(const LabeledDataset& dataset, CorruptionKind kind, int severity,
                       std::uint64_t seed) {
    if (kind != CorruptionKind::gaussian_noise)
        throw std::invalid_argument("corrupt: unknown corruption kind");
    if (severity < 1 || severity > 5)
        throw std::invalid_argument("corrupt: severity must be in 1..5");
    LabeledDataset out = dataset;
    const double sigma = kSeverityUnitSigma * severity;
    Rng rng(derive_seed(seed, "corrupt", static_cast<std::uint64_t>(severity)));
    for (double& x : out.features.data()) x += sigma * rng.normal();
    return out;
}

LayeredModel train_base(const ModelSpec& spec, const LabeledDataset& train, int epochs,
                        std::uint64_t seed, const TrainOptions& options) {
    if (train.size() == 0) throw std::invalid_argument("train_base: empty training set");
    if (epochs < 0) throw std::invalid_argument("train_base: negative epoch count");

    std::vector<std::size_t> dims = spec.hidden;
    dims.push_back(static_cast<std::size_t>(train.class_count));
    const std::size_t split = spec.split_index >= 0 ? static_cast<std::size_t>(spec.split_index)
                                                    : std::max<std::size_t>(dims.size() / 2,
                                                                            dims.size() > 1 ? 1 : 0);
    LayeredModel model(train.dim(), dims, split, derive_seed(seed, "init"));
    if (epochs == 0) return model;

    const std::size_t n = train.size();
    const std::size_t batch = std::min<std::size_t>(options.batch_size, n);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    SgdConfig sgd;
    sgd.base_lr = options.base_lr;
    sgd.momentum = options.momentum;
    sgd.weight_decay = options.weight_decay;
    sgd.total_steps = static_cast<std::size_t>(epochs) * steps_per_epoch;
    SgdOptimizer opt(model, 0, sgd);

    Rng shuffle_rng(derive_seed(seed, "shuffle"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            Batch b;
            b.inputs = Matrix(count, train.dim());
            b.labels.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t src = order[start + i];
                std::memcpy(b.inputs.row_ptr(i), train.features.row_ptr(src),
                            train.dim() * sizeof(double));
                b.labels[i] = train.labels[src];
            }
            ForwardBatch fb = model.forward_batch(b.inputs);
            ScalarLossGrad ce = cross_entropy(fb.logits(), b.labels);
            GradientSet grads = model.backward(fb, ce.grad, nullptr, 0);
            opt.step(model, grads);
        }
    }
    return model;
}

double top1_accuracy(const LayeredModel& model, const LabeledDataset& data) {
    return topk_accuracy(model, data, 1);
}

double topk_accuracy(const LayeredModel& model, const LabeledDataset& data, std::size_t k) {
    if (data.size() == 0) return 0.0;
    ForwardBatch fb = model.forward_batch(data.features);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double* row = fb.logits().row_ptr(i);
        const double own = row[data.labels[i]];
        // rank of the true class under (value desc, index asc) tie order
        std::size_t better = 0;
        for (std::size_t j = 0; j < fb.logits().cols(); ++j) {
            if (row[j] > own) ++better;
            else if (row[j] == own && static_cast<int>(j) < data.labels[i]) ++better;
        }
        if (better < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

double dataset_ce_loss(const LayeredModel& model, const LabeledDataset& data) {
    ForwardBatch fb = model.forward_batch(data.features);
    return cross_entropy(fb.logits(), data.labels).loss;
}

void save_dataset_csv(const LabeledDataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dataset: cannot open for writing: " + path);
    out << "label";
    for (std::size_t k = 0; k < data.dim(); ++k) out << ",f" << k;
    out << "\n";
    char buf[40];
    for (std::size_t i = 0; i < data.size(); ++i) {
        out << data.labels[i];
        const double* row = data.features.row_ptr(i);
        for (std::size_t k = 0; k < data.dim(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[k]);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("dataset: write failed: " + path);
}

LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset: cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset: empty file: " + path);
    std::size_t dim = 0;
    for (char ch : line)
        if (ch == ',') ++dim;
    if (dim == 0) throw std::runtime_error("dataset: header has no feature columns: " + path);

    std::vector<int> labels;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("dataset: bad row: " + path);
        labels.push_back(std::stoi(cell));
        std::size_t got = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++got;
        }
        if (got != dim) throw std::runtime_error("dataset: ragged row: " + path);
    }
    LabeledDataset out;
    out.features = Matrix(labels.size(), dim);
    std::copy(values.begin(), values.end(), out.features.data().begin());
    out.labels = std::move(labels);
    out.class_count = out.labels.empty()
                          ? 0
                          : *std::max_element(out.labels.begin(), out.labels.end()) + 1;
    return out;
}

namespace {

constexpr char kDataMagic[8] = {'C', 'L', 'I', 'D', 'A', 'T', 'A', '1'};

void write_i32(std::ostream& out, std::int32_t v) {
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i)
        bytes[i] = static_cast<unsigned char>(static_cast<std::uint32_t>(v) >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::int32_t read_i32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw std::runtime_error("dataset: truncated binary file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    return static_cast<std::int32_t>(v);
}

void write_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64(std::istream& in) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    if (!in) throw std::runtime_error("dataset: truncated binary file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

void save_dataset_binary(const LabeledDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("dataset: cannot open for writing: " + path);
    out.write(kDataMagic, sizeof(kDataMagic));
    write_i32(out, static_cast<std::int32_t>(data.size()));
    write_i32(out, static_cast<std::int32_t>(data.dim()));
    write_i32(out, data.class_count);
    write_i32(out, static_cast<std::int32_t>(data.superclass_map.size()));
    for (int label : data.labels) write_i32(out, label);
    for (double x : data.features.data()) write_f64(out, x);
    for (int s : data.superclass_map) write_i32(out, s);
    if (!out) throw std::runtime_error("dataset: write failed: " + path);
}

LabeledDataset load_dataset_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("dataset: cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kDataMagic, sizeof(kDataMagic)) != 0)
        throw std::runtime_error("dataset: bad magic string: " + path);
    const std::int32_t rows = read_i32(in);
    const std::int32_t dim = read_i32(in);
    const std::int32_t classes = read_i32(in);
    const std::int32_t map_size = read_i32(in);
    if (rows < 0 || dim <= 0 || classes <= 0 || map_size < 0)
        throw std::runtime_error("dataset: invalid binary header");
    LabeledDataset out;
    out.class_count = classes;
    out.labels.resize(static_cast<std::size_t>(rows));
    for (int& label : out.labels) label = read_i32(in);
    out.features = Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(dim));
    for (double& x : out.features.data()) x = read_f64(in);
    out.superclass_map.resize(static_cast<std::size_t>(map_size));
    for (int& s : out.superclass_map) s = read_i32(in);
    return out;
}

}  // namespace cliloop
