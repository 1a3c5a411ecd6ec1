#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "cliloop/matrix.hpp"
#include "cliloop/model.hpp"
#include "cliloop/rng.hpp"

namespace testutil {

using cliloop::LayeredModel;
using cliloop::Matrix;
using cliloop::Rng;
using cliloop::Vector;

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& x : m.data()) x = scale * rng.normal();
    return m;
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n, int classes) {
    std::vector<int> labels(n);
    for (int& y : labels) y = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
    return labels;
}

// Central finite differences of a scalar function over a flat parameter view.
inline std::vector<double> finite_difference(const std::function<double()>& eval,
                                             const std::vector<double*>& params,
                                             double step = 1e-5) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + step;
        const double up = eval();
        *params[i] = saved - step;
        const double down = eval();
        *params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

inline double relative_gradient_error(const std::vector<double>& analytic,
                                      const std::vector<double>& numeric) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double d = analytic[i] - numeric[i];
        diff += d * d;
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
    return std::sqrt(diff) / denom;
}

// Pointers to every weight and bias in groups [first_group, L), matching the
// flattening order of GradientSet.
inline std::vector<double*> parameter_view(LayeredModel& model, std::size_t first_group) {
    std::vector<double*> out;
    for (std::size_t g = first_group; g < model.group_count(); ++g) {
        for (double& w : model.group(g).weights.data()) out.push_back(&w);
        for (double& b : model.group(g).biases) out.push_back(&b);
    }
    return out;
}

inline std::vector<double> flatten(const cliloop::GradientSet& grads) {
    std::vector<double> out;
    for (const auto& layer : grads.layers) {
        for (double w : layer.weights.data()) out.push_back(w);
        for (double b : layer.biases) out.push_back(b);
    }
    return out;
}

inline std::vector<double> flatten(const Matrix& m) { return m.data(); }

// Smallest |pre-activation| over the hidden (ReLU) groups. Finite
// differences are meaningless across the kink, so gradient-check cases keep
// a margin around it.
inline double kink_margin(const cliloop::ForwardBatch& fb) {
    double margin = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g + 1 < fb.pre_activations.size(); ++g)
        for (double v : fb.pre_activations[g].data())
            margin = std::min(margin, std::fabs(v));
    return margin;
}

}  // namespace testutil
