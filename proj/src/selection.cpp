#include "cliloop/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cliloop/losses.hpp"

namespace cliloop {

std::string to_string(ScoreKind kind) {
    switch (kind) {
        case ScoreKind::softmax_max: return "softmax_max";
        case ScoreKind::entropy: return "entropy";
        case ScoreKind::energy: return "energy";
    }
    return "unknown";
}

ScoreKind score_kind_from_string(const std::string& name) {
    if (name == "softmax_max") return ScoreKind::softmax_max;
    if (name == "entropy") return ScoreKind::entropy;
    if (name == "energy") return ScoreKind::energy;
    throw std::invalid_argument("unknown score kind: " + name);
}

double confidence_score(const Vector& probs, const Vector& logits, ScoreKind kind) {
    switch (kind) {
        case ScoreKind::softmax_max: {
            if (probs.empty() || !all_finite(probs))
                throw std::domain_error("confidence_score: invalid probabilities");
            return *std::max_element(probs.begin(), probs.end());
        }
        case ScoreKind::entropy: {
            if (probs.empty() || !all_finite(probs))
                throw std::domain_error("confidence_score: invalid probabilities");
            double acc = 0.0;
            for (double p : probs)
                if (p > 0.0) acc += p * std::log(p);
            return acc;  // = -H(p), so larger is more confident
        }
        case ScoreKind::energy: {
            if (logits.empty() || !all_finite(logits))
                throw std::domain_error("confidence_score: invalid logits");
            const double m = *std::max_element(logits.begin(), logits.end());
            double denom = 0.0;
            for (double l : logits) denom += std::exp(l - m);
            return m + std::log(denom);  // negated energy at T = 1
        }
    }
    throw std::logic_error("confidence_score: unhandled kind");
}

std::vector<int> Prediction::top_k(std::size_t k) const {
    const std::size_t take = std::min(k, ranking.size());
    return std::vector<int>(ranking.begin(), ranking.begin() + static_cast<std::ptrdiff_t>(take));
}

bool Prediction::label_in_top_k(int label, std::size_t k) const {
    const std::size_t take = std::min(k, ranking.size());
    for (std::size_t i = 0; i < take; ++i)
        if (ranking[i] == label) return true;
    return false;
}

Prediction make_prediction(int sample_id, const Vector& logits, ScoreKind kind) {
    Prediction p;
    p.sample_id = sample_id;
    p.logits = logits;
    p.probs = softmax(logits);
    p.score_kind = kind;
    p.confidence = confidence_score(p.probs, p.logits, kind);
    p.ranking.resize(logits.size());
    std::iota(p.ranking.begin(), p.ranking.end(), 0);
    std::sort(p.ranking.begin(), p.ranking.end(), [&](int a, int b) {
        const double pa = p.probs[static_cast<std::size_t>(a)];
        const double pb = p.probs[static_cast<std::size_t>(b)];
        if (pa != pb) return pa > pb;
        return a < b;
    });
    return p;
}

std::vector<Prediction> predict_batch(const LayeredModel& model, const Matrix& inputs,
                                      ScoreKind kind) {
    ForwardBatch fb = model.forward_batch(inputs);
    std::vector<Prediction> out;
    out.reserve(inputs.rows());
    for (std::size_t i = 0; i < inputs.rows(); ++i)
        out.push_back(make_prediction(static_cast<int>(i), fb.logits().row(i), kind));
    return out;
}

SplitResult split_by_confidence(const std::vector<Prediction>& predictions, double epsilon) {
    if (predictions.empty()) throw std::invalid_argument("split_by_confidence: no predictions");
    const ScoreKind kind = predictions.front().score_kind;
    for (const Prediction& p : predictions)
        if (p.score_kind != kind)
            throw std::invalid_argument("split_by_confidence: mixed score kinds");
    if (epsilon <= 0.0 || epsilon > 1.0)
        throw std::invalid_argument("split_by_confidence: epsilon must be in (0, 1]");

    SplitResult out;
    out.epsilon = epsilon;
    if (kind == ScoreKind::softmax_max) {
        out.threshold = epsilon;
    } else {
        // epsilon names the fraction kept high; cut at that order statistic.
        std::vector<double> conf;
        conf.reserve(predictions.size());
        for (const Prediction& p : predictions) conf.push_back(p.confidence);
        std::sort(conf.begin(), conf.end(), std::greater<double>());
        const auto want_high = static_cast<std::size_t>(
            std::ceil(epsilon * static_cast<double>(conf.size()) - 1e-12));
        out.threshold = conf[std::min(conf.size(), std::max<std::size_t>(want_high, 1)) - 1];
    }
    for (const Prediction& p : predictions) {
        if (p.confidence >= out.threshold)
            out.high_ids.push_back(p.sample_id);
        else
            out.low_ids.push_back(p.sample_id);
    }
    return out;
}

std::vector<RatioPoint> f1t5_ratio_curve(const std::vector<Prediction>& predictions,
                                         const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("f1t5_ratio_curve: label count mismatch");
    std::vector<std::size_t> order(predictions.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (predictions[a].confidence != predictions[b].confidence)
            return predictions[a].confidence < predictions[b].confidence;
        return predictions[a].sample_id < predictions[b].sample_id;
    });

    std::vector<RatioPoint> curve;
    curve.reserve(predictions.size());
    std::size_t hits = 0;
    for (std::size_t m = 0; m < order.size(); ++m) {
        const Prediction& p = predictions[order[m]];
        const int label = labels[order[m]];
        if (p.top1() != label && p.label_in_top_k(label, 5)) ++hits;
        curve.push_back({m + 1, static_cast<double>(hits) / static_cast<double>(m + 1)});
    }
    return curve;
}

}  // namespace cliloop
