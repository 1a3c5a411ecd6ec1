#include "cliloop/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cliloop {

double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) throw std::invalid_argument("cosine_lr: total_steps must be positive");
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

SgdOptimizer::SgdOptimizer(const LayeredModel& model, std::size_t first_group,
                           const SgdConfig& cfg)
    : cfg_(cfg), first_group_(first_group) {
    if (first_group >= model.group_count())
        throw std::invalid_argument("SgdOptimizer: empty trainable suffix");
    if (cfg.base_lr <= 0.0) throw std::invalid_argument("SgdOptimizer: base_lr must be positive");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw std::invalid_argument("SgdOptimizer: momentum must be in [0, 1)");
    if (cfg.weight_decay < 0.0)
        throw std::invalid_argument("SgdOptimizer: weight_decay must be nonnegative");
    if (cfg.total_steps == 0)
        throw std::invalid_argument("SgdOptimizer: total_steps must be positive");
    for (std::size_t g = first_group; g < model.group_count(); ++g) {
        LayerGradient v;
        v.weights = Matrix(model.group(g).weights.rows(), model.group(g).weights.cols());
        v.biases = Vector(model.group(g).biases.size(), 0.0);
        velocity_.push_back(std::move(v));
    }
}

void SgdOptimizer::step(LayeredModel& model, const GradientSet& grads) {
    if (step_count_ >= cfg_.total_steps)
        throw std::runtime_error("SgdOptimizer: step budget exhausted");
    if (grads.first_group != first_group_ || grads.layers.size() != velocity_.size())
        throw std::invalid_argument("SgdOptimizer: gradient set does not match optimizer layout");

    const double lr = cosine_lr(cfg_.base_lr, step_count_, cfg_.total_steps);
    for (std::size_t i = 0; i < velocity_.size(); ++i) {
        LayerGroup& layer = model.group(first_group_ + i);
        const LayerGradient& g = grads.layers[i];
        LayerGradient& v = velocity_[i];
        if (!g.weights.same_shape(layer.weights) || g.biases.size() != layer.biases.size())
            throw std::invalid_argument("SgdOptimizer: gradient shape mismatch");
        if (!all_finite(g.weights) || !all_finite(g.biases))
            throw std::domain_error("SgdOptimizer: non-finite gradient");

        for (std::size_t idx = 0; idx < v.weights.data().size(); ++idx) {
            double& vel = v.weights.data()[idx];
            double& w = layer.weights.data()[idx];
            vel = cfg_.momentum * vel + (g.weights.data()[idx] + cfg_.weight_decay * w);
            w -= lr * vel;
        }
        for (std::size_t idx = 0; idx < v.biases.size(); ++idx) {
            double& vel = v.biases[idx];
            double& b = layer.biases[idx];
            vel = cfg_.momentum * vel + (g.biases[idx] + cfg_.weight_decay * b);
            b -= lr * vel;
        }
    }
    ++step_count_;
}

}  // namespace cliloop
