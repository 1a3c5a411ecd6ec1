#pragma once

#include <cstddef>
#include <vector>

#include "cliloop/model.hpp"

namespace cliloop {

struct SgdConfig {
    double base_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t total_steps = 1;
};

// lr(step) = base_lr * 0.5 * (1 + cos(pi * step / total_steps))
double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps);

// Heavy-ball SGD over a contiguous suffix of layer groups:
//   v <- momentum * v + (grad + weight_decay * param)
//   param <- param - lr(step) * v
class SgdOptimizer {
public:
    SgdOptimizer(const LayeredModel& model, std::size_t first_group, const SgdConfig& cfg);

    void step(LayeredModel& model, const GradientSet& grads);

    std::size_t step_count() const { return step_count_; }
    double current_lr() const { return cosine_lr(cfg_.base_lr, step_count_, cfg_.total_steps); }

private:
    SgdConfig cfg_;
    std::size_t first_group_;
    std::size_t step_count_ = 0;
    std::vector<LayerGradient> velocity_;  // aligned with groups [first_group, L)
};

}  // namespace cliloop
