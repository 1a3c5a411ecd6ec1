#include "cliloop/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cliloop/digest.hpp"
#include "cliloop/rng.hpp"

namespace cliloop {

LayeredModel::LayeredModel(std::size_t input_dim, const std::vector<std::size_t>& group_dims,
                           std::size_t split_index, std::uint64_t init_seed) {
    if (input_dim == 0) throw std::invalid_argument("LayeredModel: input_dim must be positive");
    if (group_dims.empty()) throw std::invalid_argument("LayeredModel: at least one group required");
    for (std::size_t w : group_dims)
        if (w == 0) throw std::invalid_argument("LayeredModel: group widths must be positive");
    const std::size_t L = group_dims.size();
    if (split_index >= L) throw std::invalid_argument("LayeredModel: split_index must be < group count");
    if (L >= 2 && split_index == 0)
        throw std::invalid_argument("LayeredModel: split_index must be >= 1 for multi-group models");

    input_dim_ = input_dim;
    split_index_ = split_index;
    Rng rng(init_seed);
    std::size_t fan_in = input_dim;
    for (std::size_t g = 0; g < L; ++g) {
        const std::size_t fan_out = group_dims[g];
        LayerGroup layer;
        layer.weights = Matrix(fan_out, fan_in);
        layer.biases = Vector(fan_out, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& w : layer.weights.data()) w = rng.uniform(-bound, bound);
        groups_.push_back(std::move(layer));
        fan_in = fan_out;
    }
}

std::size_t LayeredModel::feature_dim() const {
    if (groups_.empty()) return 0;
    return groups_.size() == 1 ? input_dim_ : groups_[groups_.size() - 2].biases.size();
}

void LayeredModel::validate_input(const Matrix& inputs) const {
    if (inputs.cols() != input_dim_)
        throw std::invalid_argument("LayeredModel: input width does not match input_dim");
    if (!all_finite(inputs))
        throw std::domain_error("LayeredModel: non-finite input");
}

ForwardBatch LayeredModel::forward_batch(const Matrix& inputs) const {
    validate_input(inputs);
    const std::size_t L = groups_.size();
    ForwardBatch out;
    out.activations.reserve(L + 1);
    out.pre_activations.reserve(L);
    out.activations.push_back(inputs);
    for (std::size_t g = 0; g < L; ++g) {
        const LayerGroup& layer = groups_[g];
        Matrix pre = matmul_nt(out.activations.back(), layer.weights);
        for (std::size_t i = 0; i < pre.rows(); ++i) {
            double* row = pre.row_ptr(i);
            for (std::size_t j = 0; j < pre.cols(); ++j) row[j] += layer.biases[j];
        }
        Matrix act = pre;
        if (g + 1 < L) {
            for (double& x : act.data()) x = x > 0.0 ? x : 0.0;  // ReLU
        }
        out.pre_activations.push_back(std::move(pre));
        out.activations.push_back(std::move(act));
    }
    return out;
}

std::pair<Vector, Vector> LayeredModel::forward(const Vector& x) const {
    if (x.size() != input_dim_)
        throw std::invalid_argument("LayeredModel: input length does not match input_dim");
    Matrix in(1, x.size());
    in.set_row(0, x);
    ForwardBatch fb = forward_batch(in);
    return {fb.features().row(0), fb.logits().row(0)};
}

GradientSet LayeredModel::backward(const ForwardBatch& cache, const Matrix& grad_logits,
                                   const Matrix* grad_features,
                                   std::size_t first_trainable_group) const {
    const std::size_t L = groups_.size();
    if (first_trainable_group >= L)
        throw std::invalid_argument("LayeredModel::backward: empty trainable suffix");
    if (cache.activations.size() != L + 1)
        throw std::invalid_argument("LayeredModel::backward: cache does not match model");
    if (grad_logits.rows() != cache.activations[0].rows() || grad_logits.cols() != class_count())
        throw std::invalid_argument("LayeredModel::backward: grad_logits shape mismatch");
    if (grad_features != nullptr &&
        (grad_features->rows() != grad_logits.rows() || grad_features->cols() != feature_dim()))
        throw std::invalid_argument("LayeredModel::backward: grad_features shape mismatch");

    GradientSet grads;
    grads.first_group = first_trainable_group;
    grads.layers.resize(L - first_trainable_group);

    Matrix delta = grad_logits;  // gradient at the current group's output
    for (std::size_t gi = L; gi-- > first_trainable_group;) {
        const LayerGroup& layer = groups_[gi];
        if (gi + 1 < L) {
            // ReLU mask from the stored pre-activation
            const Matrix& pre = cache.pre_activations[gi];
            for (std::size_t idx = 0; idx < delta.data().size(); ++idx)
                if (pre.data()[idx] <= 0.0) delta.data()[idx] = 0.0;
        }
        LayerGradient& lg = grads.layers[gi - first_trainable_group];
        lg.weights = matmul_tn(delta, cache.activations[gi]);
        lg.biases = Vector(layer.biases.size(), 0.0);
        for (std::size_t i = 0; i < delta.rows(); ++i) {
            const double* row = delta.row_ptr(i);
            for (std::size_t j = 0; j < delta.cols(); ++j) lg.biases[j] += row[j];
        }
        if (gi > first_trainable_group) {
            delta = matmul(delta, layer.weights);
            if (gi == L - 1 && grad_features != nullptr) {
                for (std::size_t idx = 0; idx < delta.data().size(); ++idx)
                    delta.data()[idx] += grad_features->data()[idx];
            }
        }
    }
    return grads;
}

namespace {

std::uint64_t digest_groups(const std::vector<LayerGroup>& groups, std::size_t from,
                            std::size_t to) {
    Digest d;
    for (std::size_t g = from; g < to; ++g) {
        d.add(groups[g].weights);
        d.add(groups[g].biases);
    }
    return d.value();
}

}  // namespace

std::uint64_t LayeredModel::digest_all() const { return digest_groups(groups_, 0, groups_.size()); }
std::uint64_t LayeredModel::digest_shallow() const { return digest_groups(groups_, 0, split_index_); }
std::uint64_t LayeredModel::digest_deep() const {
    return digest_groups(groups_, split_index_, groups_.size());
}

ParamSnapshot snapshot_deep(const LayeredModel& model) {
    ParamSnapshot snap;
    snap.first_group = model.split_index();
    for (std::size_t g = model.split_index(); g < model.group_count(); ++g)
        snap.deep_params.push_back(model.group(g));
    snap.digest = model.digest_deep();
    return snap;
}

void restore_deep(LayeredModel& model, const ParamSnapshot& snapshot) {
    if (snapshot.first_group != model.split_index() ||
        snapshot.first_group + snapshot.deep_params.size() != model.group_count())
        throw std::invalid_argument("restore_deep: snapshot does not match model layout");
    for (std::size_t i = 0; i < snapshot.deep_params.size(); ++i) {
        const LayerGroup& src = snapshot.deep_params[i];
        LayerGroup& dst = model.group(snapshot.first_group + i);
        if (!src.weights.same_shape(dst.weights) || src.biases.size() != dst.biases.size())
            throw std::invalid_argument("restore_deep: snapshot shapes do not match model");
        dst = src;
    }
}

namespace {

constexpr char kMagic[8] = {'C', 'L', 'I', 'L', 'O', 'O', 'P', '1'};
constexpr std::int32_t kCheckpointVersion = 1;

void write_i32(std::ostream& out, std::int32_t v) {
    unsigned char bytes[4];
    for (int i = 0; i < 4; ++i) bytes[i] = static_cast<unsigned char>(static_cast<std::uint32_t>(v) >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::int32_t read_i32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) throw std::runtime_error("checkpoint: truncated header");
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
    if (!in) throw std::runtime_error("checkpoint: truncated parameter data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const LayeredModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    write_i32(out, kCheckpointVersion);
    write_i32(out, static_cast<std::int32_t>(model.group_count()));
    write_i32(out, static_cast<std::int32_t>(model.split_index()));
    write_i32(out, static_cast<std::int32_t>(model.input_dim()));
    write_i32(out, static_cast<std::int32_t>(model.class_count()));
    for (std::size_t g = 0; g < model.group_count(); ++g) {
        write_i32(out, static_cast<std::int32_t>(model.group(g).weights.rows()));
        write_i32(out, static_cast<std::int32_t>(model.group(g).weights.cols()));
    }
    for (std::size_t g = 0; g < model.group_count(); ++g) {
        for (double w : model.group(g).weights.data()) write_f64(out, w);
        for (double b : model.group(g).biases) write_f64(out, b);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

LayeredModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic string: " + path);
    const std::int32_t version = read_i32(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    const std::int32_t L = read_i32(in);
    const std::int32_t split = read_i32(in);
    const std::int32_t input_dim = read_i32(in);
    const std::int32_t class_count = read_i32(in);
    if (L <= 0 || input_dim <= 0 || class_count <= 0 || split < 0 || split >= L)
        throw std::runtime_error("checkpoint: invalid header");

    std::vector<std::size_t> dims;
    std::size_t expect_in = static_cast<std::size_t>(input_dim);
    for (std::int32_t g = 0; g < L; ++g) {
        const std::int32_t rows = read_i32(in);
        const std::int32_t cols = read_i32(in);
        if (rows <= 0 || cols <= 0 || static_cast<std::size_t>(cols) != expect_in)
            throw std::runtime_error("checkpoint: inconsistent layer shapes");
        dims.push_back(static_cast<std::size_t>(rows));
        expect_in = static_cast<std::size_t>(rows);
    }
    if (dims.back() != static_cast<std::size_t>(class_count))
        throw std::runtime_error("checkpoint: class count does not match final layer");

    LayeredModel model(static_cast<std::size_t>(input_dim), dims,
                       static_cast<std::size_t>(split), 0);
    for (std::int32_t g = 0; g < L; ++g) {
        LayerGroup& layer = model.group(static_cast<std::size_t>(g));
        for (double& w : layer.weights.data()) w = read_f64(in);
        for (double& b : layer.biases) b = read_f64(in);
        if (!all_finite(layer.weights) || !all_finite(layer.biases))
            throw std::runtime_error("checkpoint: non-finite parameters");
    }
    return model;
}

}  // namespace cliloop
