#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cliloop/matrix.hpp"
#include "cliloop/model.hpp"

namespace cliloop {

enum class ScoreKind { softmax_max, entropy, energy };

std::string to_string(ScoreKind kind);
ScoreKind score_kind_from_string(const std::string& name);

// Confidence value under the given score: larger always means more
// confident. softmax_max is max(probs); entropy is -H(probs); energy is
// log sum exp(logits) (the negated energy at temperature 1).
double confidence_score(const Vector& probs, const Vector& logits, ScoreKind kind);

struct Prediction {
    int sample_id = 0;
    Vector logits;
    Vector probs;
    std::vector<int> ranking;  // classes by descending probability, ties by index
    double confidence = 0.0;
    ScoreKind score_kind = ScoreKind::softmax_max;

    int top1() const { return ranking.front(); }
    std::vector<int> top_k(std::size_t k) const;
    bool label_in_top_k(int label, std::size_t k) const;
};

Prediction make_prediction(int sample_id, const Vector& logits, ScoreKind kind);
std::vector<Prediction> predict_batch(const LayeredModel& model, const Matrix& inputs,
                                      ScoreKind kind);

struct SplitResult {
    std::vector<int> high_ids;
    std::vector<int> low_ids;
    double epsilon = 0.0;
    double threshold = 0.0;  // confidence value actually compared against
};

// For softmax_max the threshold is epsilon itself and a sample is confident
// iff S >= epsilon (boundary counts as high). Entropy/energy confidences
// have no fixed scale, so epsilon is quantile-calibrated there: it names the
// fraction of samples kept high, with the cut at the matching order
// statistic (ties stay high).
SplitResult split_by_confidence(const std::vector<Prediction>& predictions, double epsilon);

struct RatioPoint {
    std::size_t prefix_size = 0;
    double ratio = 0.0;
};

// Samples sorted by ascending confidence; for each prefix, the fraction
// whose top-1 is wrong while the true label sits in the top-5 (top-K
// clamped to the class count).
std::vector<RatioPoint> f1t5_ratio_curve(const std::vector<Prediction>& predictions,
                                         const std::vector<int>& labels);

}  // namespace cliloop
