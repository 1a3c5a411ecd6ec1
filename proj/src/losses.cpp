#include "cliloop/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace cliloop {

Vector softmax(const Vector& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    if (!all_finite(logits)) throw std::domain_error("softmax: non-finite logit");
    const double m = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double denom = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        denom += out[i];
    }
    for (double& p : out) p /= denom;
    return out;
}

Matrix softmax_rows(const Matrix& logits) {
    if (!all_finite(logits)) throw std::domain_error("softmax: non-finite logit");
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* in = logits.row_ptr(i);
        double* row = out.row_ptr(i);
        double m = in[0];
        for (std::size_t j = 1; j < logits.cols(); ++j) m = std::max(m, in[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            row[j] = std::exp(in[j] - m);
            denom += row[j];
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) row[j] /= denom;
    }
    return out;
}

ScalarLossGrad cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    const std::size_t n = logits.rows();
    const std::size_t c = logits.cols();
    if (n == 0) throw std::invalid_argument("cross_entropy: empty batch");
    if (labels.size() != n) throw std::invalid_argument("cross_entropy: label count mismatch");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw std::out_of_range("cross_entropy: label out of range");

    ScalarLossGrad out;
    out.grad = softmax_rows(logits);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.grad.row_ptr(i);
        const auto y = static_cast<std::size_t>(labels[i]);
        total -= std::log(row[y]);
        row[y] -= 1.0;
        for (std::size_t j = 0; j < c; ++j) row[j] /= static_cast<double>(n);
    }
    out.loss = total / static_cast<double>(n);
    return out;
}

ScalarLossGrad supervised_contrastive(const Matrix& features, const std::vector<int>& labels,
                                      const SclConfig& cfg) {
    const std::size_t n = features.rows();
    const std::size_t f = features.cols();
    if (n == 0) throw std::invalid_argument("supervised_contrastive: empty batch");
    if (labels.size() != n)
        throw std::invalid_argument("supervised_contrastive: label count mismatch");
    if (cfg.tau <= 0.0) throw std::invalid_argument("supervised_contrastive: tau must be positive");
    if (!all_finite(features)) throw std::domain_error("supervised_contrastive: non-finite feature");

    ScalarLossGrad out;
    out.grad = Matrix(n, f);

    std::vector<std::size_t> positives(n, 0);
    bool any_positive = false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && labels[j] == labels[i]) ++positives[i];
        if (positives[i] > 0) any_positive = true;
    }
    if (!any_positive) {
        std::cerr << "warning: contrastive batch has no positive pairs; loss set to 0\n";
        return out;
    }

    // Normalize rows; keep norms for the gradient pass. Rows at the origin
    // have no direction: they stay zero and receive zero gradient.
    Matrix unit(n, f);
    Vector norms(n);
    std::vector<char> degenerate(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* src = features.row_ptr(i);
        double* dst = unit.row_ptr(i);
        double norm = 0.0;
        for (std::size_t k = 0; k < f; ++k) norm += src[k] * src[k];
        norm = std::sqrt(norm);
        degenerate[i] = norm < 1e-9 ? 1 : 0;
        norms[i] = std::max(norm, 1e-12);
        for (std::size_t k = 0; k < f; ++k) dst[k] = src[k] / norms[i];
    }

    Matrix sims = matmul_nt(unit, unit);  // cosine similarities
    for (double& s : sims.data()) s /= cfg.tau;

    // coeff(i, k) = d loss / d sims(i, k) restricted to anchor-i terms
    Matrix coeff(n, n);
    const double inv_n = 1.0 / static_cast<double>(n);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (positives[i] == 0) continue;
        const double* srow = sims.row_ptr(i);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) m = std::max(m, srow[k]);
        double denom = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) denom += std::exp(srow[k] - m);
        const double log_denom = std::log(denom) + m;

        const double inv_p = 1.0 / static_cast<double>(positives[i]);
        double anchor_loss = 0.0;
        double* crow = coeff.row_ptr(i);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            const double p_ik = std::exp(srow[k] - log_denom);
            double g = p_ik;
            if (labels[k] == labels[i]) {
                g -= inv_p;
                anchor_loss += log_denom - srow[k];
            }
            crow[k] = inv_n * g;
        }
        loss += inv_n * inv_p * anchor_loss;
    }
    out.loss = loss;

    // d loss / d unit_i = (1/tau) * sum_k (coeff(i,k) + coeff(k,i)) * unit_k
    Matrix sym(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            sym(i, k) = (coeff(i, k) + coeff(k, i)) / cfg.tau;
    Matrix grad_unit = matmul(sym, unit);

    // Through the normalization: d/dz = (g - (u . g) u) / ||z||
    for (std::size_t i = 0; i < n; ++i) {
        if (degenerate[i]) continue;
        const double* u = unit.row_ptr(i);
        const double* g = grad_unit.row_ptr(i);
        double* dst = out.grad.row_ptr(i);
        double proj = 0.0;
        for (std::size_t k = 0; k < f; ++k) proj += u[k] * g[k];
        for (std::size_t k = 0; k < f; ++k) dst[k] = (g[k] - proj * u[k]) / norms[i];
    }
    return out;
}

CombinedResult combined_objective(const LayeredModel& model, const Batch& batch,
                                  const SclConfig& cfg, std::size_t first_trainable_group) {
    if (batch.inputs.rows() == 0) throw std::invalid_argument("combined_objective: empty batch");
    if (cfg.lambda < 0.0)
        throw std::invalid_argument("combined_objective: lambda must be nonnegative");

    CombinedResult result;
    ForwardBatch fb = model.forward_batch(batch.inputs);
    ScalarLossGrad ce = cross_entropy(fb.logits(), batch.labels);
    result.ce = ce.loss;

    if (cfg.lambda > 0.0) {
        ScalarLossGrad scl = supervised_contrastive(fb.features(), batch.labels, cfg);
        result.scl = scl.loss;
        for (double& g : scl.grad.data()) g *= cfg.lambda;
        result.loss = ce.loss + cfg.lambda * scl.loss;
        result.grads = model.backward(fb, ce.grad, &scl.grad, first_trainable_group);
    } else {
        result.loss = ce.loss;
        result.grads = model.backward(fb, ce.grad, nullptr, first_trainable_group);
    }
    return result;
}

}  // namespace cliloop
