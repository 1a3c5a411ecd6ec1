#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cliloop/matrix.hpp"

namespace cliloop {

// One affine unit: outputs = inputs * W^T + b, followed by the group's
// nonlinearity (ReLU everywhere except the final logit group).
struct LayerGroup {
    Matrix weights;  // out x in
    Vector biases;   // out
};

struct ForwardBatch {
    // activations[0] is the input batch; activations[g + 1] is the output of
    // group g after its nonlinearity. features == activations[L - 1], the
    // input to the classifier group. logits == activations[L].
    std::vector<Matrix> activations;
    std::vector<Matrix> pre_activations;
    const Matrix& features() const { return activations[activations.size() - 2]; }
    const Matrix& logits() const { return activations.back(); }
};

struct LayerGradient {
    Matrix weights;  // same shape as the group's weights
    Vector biases;
};

// Gradients for the contiguous suffix of groups [first_group, L).
struct GradientSet {
    std::size_t first_group = 0;
    std::vector<LayerGradient> layers;
};

// Bitwise copy of the deep parameter groups plus a content digest, for
// exact rollback between auxiliary trainings.
struct ParamSnapshot {
    std::size_t first_group = 0;  // == split_index of the source model
    std::vector<LayerGroup> deep_params;
    std::uint64_t digest = 0;
};

class LayeredModel {
public:
    LayeredModel() = default;

    // group_dims lists each group's output width; the last entry is the class
    // count. Weights start uniform in +-sqrt(6 / (fan_in + fan_out)).
    LayeredModel(std::size_t input_dim, const std::vector<std::size_t>& group_dims,
                 std::size_t split_index, std::uint64_t init_seed);

    std::size_t input_dim() const { return input_dim_; }
    std::size_t class_count() const { return groups_.empty() ? 0 : groups_.back().biases.size(); }
    std::size_t group_count() const { return groups_.size(); }
    std::size_t split_index() const { return split_index_; }
    std::size_t feature_dim() const;

    LayerGroup& group(std::size_t g) { return groups_[g]; }
    const LayerGroup& group(std::size_t g) const { return groups_[g]; }

    // z is the penultimate activation (input of the classifier group).
    std::pair<Vector, Vector> forward(const Vector& x) const;  // (z, logits)
    ForwardBatch forward_batch(const Matrix& inputs) const;

    // Parameter gradients for groups [first_trainable_group, L) given the
    // loss gradient at the logits and optionally at the feature node.
    GradientSet backward(const ForwardBatch& cache, const Matrix& grad_logits,
                         const Matrix* grad_features, std::size_t first_trainable_group) const;

    std::uint64_t digest_all() const;
    std::uint64_t digest_shallow() const;  // groups [0, split_index)
    std::uint64_t digest_deep() const;     // groups [split_index, L)

private:
    std::size_t input_dim_ = 0;
    std::size_t split_index_ = 0;
    std::vector<LayerGroup> groups_;

    void validate_input(const Matrix& inputs) const;
};

ParamSnapshot snapshot_deep(const LayeredModel& model);
void restore_deep(LayeredModel& model, const ParamSnapshot& snapshot);

// Checkpoint container: magic "CLILOOP1", version, layer shape header
// (little-endian 32-bit ints, split index included), then row-major 64-bit
// parameter arrays.
void save_checkpoint(const LayeredModel& model, const std::string& path);
LayeredModel load_checkpoint(const std::string& path);

}  // namespace cliloop
