#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "cliloop/rng.hpp"
#include "cliloop/selection.hpp"
#include "test_util.hpp"

using namespace cliloop;

namespace {

Prediction fake_prediction(int id, double confidence, ScoreKind kind = ScoreKind::softmax_max) {
    Prediction p;
    p.sample_id = id;
    p.confidence = confidence;
    p.score_kind = kind;
    p.ranking = {0};
    return p;
}

}  // namespace

TEST_CASE("score: uniform and one-hot extremes") {
    Vector uniform(10, 0.1);
    CHECK(confidence_score(uniform, {}, ScoreKind::softmax_max) == doctest::Approx(0.1));
    CHECK(confidence_score(uniform, {}, ScoreKind::entropy) ==
          doctest::Approx(-std::log(10.0)).epsilon(1e-12));

    Vector onehot(10, 0.0);
    onehot[3] = 1.0;
    CHECK(confidence_score(onehot, {}, ScoreKind::softmax_max) == doctest::Approx(1.0));
    CHECK(confidence_score(onehot, {}, ScoreKind::entropy) == doctest::Approx(0.0));
}

TEST_CASE("score: energy at T=1 is the log-sum-exp of the logits") {
    Vector logits = {2.0, 1.0, 0.0};
    const double expect = std::log(std::exp(2.0) + std::exp(1.0) + 1.0);
    CHECK(confidence_score({}, logits, ScoreKind::energy) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("score: rejects non-finite input") {
    CHECK_THROWS_AS(confidence_score({0.5, std::nan("")}, {}, ScoreKind::softmax_max),
                    std::domain_error);
    CHECK_THROWS_AS(confidence_score({}, {1.0, std::nan("")}, ScoreKind::energy),
                    std::domain_error);
}

TEST_CASE("split: the exact boundary sample counts as confident") {
    std::vector<Prediction> preds = {fake_prediction(0, 0.70), fake_prediction(1, 0.699999),
                                     fake_prediction(2, 0.91)};
    SplitResult r = split_by_confidence(preds, 0.7);
    CHECK(std::find(r.high_ids.begin(), r.high_ids.end(), 0) != r.high_ids.end());
    CHECK(std::find(r.low_ids.begin(), r.low_ids.end(), 1) != r.low_ids.end());
    CHECK(r.high_ids.size() == 2);
    CHECK(r.low_ids.size() == 1);
}

TEST_CASE("split: epsilon 1.0 sends everything below certainty to the low side") {
    std::vector<Prediction> preds;
    for (int i = 0; i < 8; ++i) preds.push_back(fake_prediction(i, 0.2 + 0.1 * i));
    SplitResult r = split_by_confidence(preds, 1.0);
    CHECK(r.low_ids.size() == 8);
    CHECK(r.high_ids.empty());
}

TEST_CASE("split: equals the per-sample comparison oracle on random cases") {
    Rng rng(100);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.uniform_int(40);
        std::vector<Prediction> preds;
        for (std::size_t i = 0; i < n; ++i)
            preds.push_back(fake_prediction(static_cast<int>(i), rng.uniform()));
        const double eps = std::nextafter(rng.uniform(), 1.0) == 0.0 ? 0.5 : rng.uniform() + 1e-9;
        const double epsilon = std::min(eps, 1.0);
        SplitResult r = split_by_confidence(preds, epsilon);
        for (const Prediction& p : preds) {
            const bool in_high =
                std::find(r.high_ids.begin(), r.high_ids.end(), p.sample_id) != r.high_ids.end();
            const bool in_low =
                std::find(r.low_ids.begin(), r.low_ids.end(), p.sample_id) != r.low_ids.end();
            CHECK(in_high != in_low);
            CHECK(in_high == (p.confidence >= epsilon));
        }
    }
}

TEST_CASE("split: low side grows monotonically with epsilon (softmax_max)") {
    Rng rng(101);
    std::vector<Prediction> preds;
    for (int i = 0; i < 50; ++i) preds.push_back(fake_prediction(i, rng.uniform()));
    std::size_t prev_low = 0;
    for (double eps = 0.05; eps <= 1.0; eps += 0.05) {
        SplitResult r = split_by_confidence(preds, eps);
        CHECK(r.low_ids.size() >= prev_low);
        prev_low = r.low_ids.size();
    }
}

TEST_CASE("split: epsilon at the minimum observed score keeps everything high") {
    Rng rng(102);
    for (ScoreKind kind : {ScoreKind::softmax_max, ScoreKind::entropy, ScoreKind::energy}) {
        std::vector<Prediction> preds;
        double min_conf = 1e18;
        for (int i = 0; i < 20; ++i) {
            const double c = kind == ScoreKind::softmax_max ? 0.2 + 0.6 * rng.uniform()
                                                            : -5.0 + 10.0 * rng.uniform();
            min_conf = std::min(min_conf, c);
            preds.push_back(fake_prediction(i, c, kind));
        }
        // softmax_max compares against epsilon directly; the others keep the
        // top fraction, so epsilon = 1 keeps every sample
        const double eps = kind == ScoreKind::softmax_max ? min_conf : 1.0;
        SplitResult r = split_by_confidence(preds, eps);
        CHECK(r.low_ids.empty());
        CHECK(r.high_ids.size() == 20);
    }
}

TEST_CASE("split: quantile kinds keep ceil(eps * n) most confident samples high") {
    std::vector<Prediction> preds;
    for (int i = 0; i < 10; ++i)
        preds.push_back(fake_prediction(i, static_cast<double>(i), ScoreKind::entropy));
    SplitResult r = split_by_confidence(preds, 0.3);
    CHECK(r.high_ids.size() == 3);  // confidences 7, 8, 9
    for (int id : r.high_ids) CHECK(id >= 7);

    // ties at the cut stay high
    std::vector<Prediction> tied;
    for (int i = 0; i < 4; ++i) tied.push_back(fake_prediction(i, 1.0, ScoreKind::energy));
    tied.push_back(fake_prediction(4, 0.5, ScoreKind::energy));
    SplitResult rt = split_by_confidence(tied, 0.2);
    CHECK(rt.high_ids.size() == 4);
}

TEST_CASE("split: deterministic for identical inputs") {
    Rng rng(103);
    std::vector<Prediction> preds;
    for (int i = 0; i < 30; ++i) preds.push_back(fake_prediction(i, rng.uniform()));
    SplitResult a = split_by_confidence(preds, 0.55);
    SplitResult b = split_by_confidence(preds, 0.55);
    CHECK(a.high_ids == b.high_ids);
    CHECK(a.low_ids == b.low_ids);
}

TEST_CASE("prediction: ranking sorts by probability with index tie-break") {
    Prediction p = make_prediction(0, {1.0, 3.0, 1.0, 2.0}, ScoreKind::softmax_max);
    CHECK(p.ranking == std::vector<int>{1, 3, 0, 2});
    CHECK(p.top1() == 1);
    CHECK(p.top_k(2) == std::vector<int>{1, 3});
    CHECK(p.confidence == doctest::Approx(p.probs[1]));
}

TEST_CASE("prediction: softmax_max ordering is invariant to a common logit shift") {
    Rng rng(104);
    std::vector<Prediction> base, shifted;
    for (int i = 0; i < 25; ++i) {
        Vector logits(6);
        for (double& l : logits) l = rng.normal() * 3.0;
        base.push_back(make_prediction(i, logits, ScoreKind::softmax_max));
        Vector moved = logits;
        for (double& l : moved) l += 17.5;
        shifted.push_back(make_prediction(i, moved, ScoreKind::softmax_max));
    }
    auto order = [](const std::vector<Prediction>& preds) {
        std::vector<int> idx(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) idx[i] = static_cast<int>(i);
        std::sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (preds[static_cast<std::size_t>(a)].confidence !=
                preds[static_cast<std::size_t>(b)].confidence)
                return preds[static_cast<std::size_t>(a)].confidence <
                       preds[static_cast<std::size_t>(b)].confidence;
            return a < b;
        });
        return idx;
    };
    CHECK(order(base) == order(shifted));
}

namespace {

Prediction labeled_case(int id, double confidence, int top1, bool label_in_5, int label, int c) {
    // builds a prediction whose top1 and top-5 membership are forced
    Vector logits(static_cast<std::size_t>(c), 0.0);
    logits[static_cast<std::size_t>(top1)] = 10.0;
    if (label_in_5 && label != top1) logits[static_cast<std::size_t>(label)] = 9.0;
    if (!label_in_5 && label != top1) {
        // push five other classes above the label
        int placed = 0;
        for (int j = 0; j < c && placed < 5; ++j) {
            if (j == label) continue;
            logits[static_cast<std::size_t>(j)] = 9.0 - 0.1 * placed;
            ++placed;
        }
        logits[static_cast<std::size_t>(top1)] = 10.0;
        logits[static_cast<std::size_t>(label)] = -5.0;
    }
    Prediction p = make_prediction(id, logits, ScoreKind::softmax_max);
    p.confidence = confidence;  // pin ordering for the curve
    return p;
}

}  // namespace

TEST_CASE("f1t5: all-correct predictions give a zero curve") {
    std::vector<Prediction> preds;
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) {
        preds.push_back(labeled_case(i, 0.1 * i, i % 3, true, i % 3, 8));
        labels.push_back(i % 3);
    }
    for (const RatioPoint& pt : f1t5_ratio_curve(preds, labels)) CHECK(pt.ratio == 0.0);
}

TEST_CASE("f1t5: single wrong-top1 right-top5 sample gives ratio one") {
    std::vector<Prediction> preds = {labeled_case(0, 0.4, 2, true, 5, 8)};
    std::vector<int> labels = {5};
    auto curve = f1t5_ratio_curve(preds, labels);
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].prefix_size == 1);
    CHECK(curve[0].ratio == 1.0);
}

TEST_CASE("f1t5: matches exhaustive counting on hand-built predictions") {
    // confidence order: ids 3, 0, 5, 1, 4, 2
    std::vector<Prediction> preds = {
        labeled_case(0, 0.20, 1, true, 4, 10),   // wrong top1, in top5  -> hit
        labeled_case(1, 0.50, 2, false, 9, 10),  // wrong top1, not in top5
        labeled_case(2, 0.90, 3, true, 3, 10),   // correct
        labeled_case(3, 0.10, 0, true, 6, 10),   // wrong top1, in top5  -> hit
        labeled_case(4, 0.70, 5, true, 5, 10),   // correct
        labeled_case(5, 0.30, 7, true, 7, 10),   // correct
    };
    std::vector<int> labels = {4, 9, 3, 6, 5, 7};
    auto curve = f1t5_ratio_curve(preds, labels);
    REQUIRE(curve.size() == 6);
    const std::vector<double> expect = {1.0 / 1, 2.0 / 2, 2.0 / 3, 2.0 / 4, 2.0 / 5, 2.0 / 6};
    for (std::size_t i = 0; i < 6; ++i) CHECK(curve[i].ratio == doctest::Approx(expect[i]));
}

TEST_CASE("f1t5: top-5 window clamps to the class count") {
    // three classes: "in top-5" is then "anywhere"
    std::vector<Prediction> preds = {labeled_case(0, 0.2, 1, true, 0, 3)};
    std::vector<int> labels = {0};
    auto curve = f1t5_ratio_curve(preds, labels);
    CHECK(curve[0].ratio == 1.0);
}

TEST_CASE("score kind names round-trip") {
    for (ScoreKind kind : {ScoreKind::softmax_max, ScoreKind::entropy, ScoreKind::energy})
        CHECK(score_kind_from_string(to_string(kind)) == kind);
    CHECK_THROWS_AS(score_kind_from_string("bogus"), std::invalid_argument);
}
