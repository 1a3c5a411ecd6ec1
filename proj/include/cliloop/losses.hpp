#pragma once

#include <vector>

#include "cliloop/matrix.hpp"
#include "cliloop/model.hpp"

namespace cliloop {

struct SclConfig {
    double tau = 0.07;    // temperature
    double lambda = 1.0;  // trade-off against cross-entropy
};

struct Batch {
    Matrix inputs;            // n x d
    std::vector<int> labels;  // n, each in [0, C)
};

// Numerically stable softmax (max-subtracted). Throws on non-finite input.
Vector softmax(const Vector& logits);
Matrix softmax_rows(const Matrix& logits);

struct ScalarLossGrad {
    double loss = 0.0;
    Matrix grad;  // same shape as the differentiated argument
};

// Mean over the batch of -log softmax(logits)[label].
// grad = (softmax - one_hot) / n.
ScalarLossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels);

// Supervised contrastive loss over raw (unnormalized) feature rows; the
// features are l2-normalized inside and the gradient flows through the
// normalization. Anchors without any same-class partner contribute zero;
// a batch where every anchor is such emits a warning and returns zero.
ScalarLossGrad supervised_contrastive(const Matrix& features, const std::vector<int>& labels,
                                      const SclConfig& cfg);

struct CombinedResult {
    double loss = 0.0;
    double ce = 0.0;
    double scl = 0.0;
    GradientSet grads;
};

// CE + lambda * SCL on the same batch; gradients restricted to groups
// [first_trainable_group, L). With lambda == 0 the contrastive term is
// skipped entirely.
CombinedResult combined_objective(const LayeredModel& model, const Batch& batch,
                                  const SclConfig& cfg, std::size_t first_trainable_group);

}  // namespace cliloop
