#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliloop/datasets.hpp"
#include "cliloop/kmeans.hpp"
#include "cliloop/model.hpp"
#include "cliloop/selection.hpp"

namespace cliloop {

enum class LoopMode { cluster, online };
std::string to_string(LoopMode mode);
LoopMode loop_mode_from_string(const std::string& name);

struct RunConfig {
    double epsilon = 0.7;
    int clusters = 400;  // clamped to the low-confidence count
    int top_k = 10;
    double lambda = 1.0;
    double tau = 0.07;
    int epochs = 5;
    int batch_size = 256;
    double base_lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double proportion = 1.0;
    // number of trailing layer groups trained during the auxiliary phase;
    // 0 means every group.
    int trainable_suffix = 0;
    ScoreKind score_kind = ScoreKind::softmax_max;
    LoopMode mode = LoopMode::cluster;
    std::uint64_t seed = 0;
    int jobs = 1;
    double jitter_sigma = 0.0;   // optional input augmentation during auxiliary training
    bool restrict_top_k = false; // restrict final argmax to the cluster's class set
};

struct AuxTask {
    std::vector<int> class_set;     // top-K classes of the source distribution
    std::vector<int> sample_ids;    // ascending train-set indices
    double proportion = 1.0;
};

// class_set = top-K entries of the probability vector (ties by ascending
// class index); sample_ids = every training sample of those classes, or a
// seeded per-class subsample totalling ceil(proportion * matches).
AuxTask build_aux_task(const std::vector<int>& train_labels, int class_count,
                       const Vector& center, std::size_t k, double proportion,
                       std::uint64_t seed);

// Fine-tunes the model on the task for cfg.epochs epochs of cfg.batch_size
// batches with the cosine schedule spent over exactly that step budget.
// Empty tasks are a warned no-op. The caller provides the rollback point.
void auxiliary_train(LayeredModel& model, const LabeledDataset& train, const AuxTask& task,
                     const RunConfig& cfg, std::uint64_t seed);

enum class Transition { f2t, t2f, f2f, t2t };
std::string to_string(Transition t);

struct SampleOutcome {
    int sample_id = 0;
    int label = 0;
    double confidence = 0.0;
    int baseline_top1 = 0;
    int final_top1 = 0;
    bool low_confidence = false;
    int cluster_id = -1;  // -1 for high-confidence samples
    Transition transition = Transition::t2t;
};

struct TransitionReport {
    std::size_t f2t = 0, t2f = 0, f2f = 0, t2t = 0;
    double baseline_acc = 0.0;
    double final_acc = 0.0;
    double tpi_seconds = 0.0;
    std::vector<SampleOutcome> per_sample;  // ascending sample id

    std::size_t test_count = 0;
    std::size_t low_count = 0;
    std::size_t high_count = 0;
    std::size_t cluster_count = 0;
    double split_threshold = 0.0;

    std::uint64_t model_digest_before = 0;
    std::uint64_t model_digest_after = 0;
    std::uint64_t snapshot_digest = 0;
    // digest of each cluster model's deep groups right before its training
    std::vector<std::uint64_t> cluster_pre_digests;

    RunConfig config;
};

// Algorithm: baseline predictions, confidence split, per-cluster rollback +
// auxiliary training + re-prediction of that cluster's members. High
// confidence samples keep their baseline top-1 untouched. The input model
// is left exactly as it was.
TransitionReport run_closed_loop(const LayeredModel& model, const LabeledDataset& train,
                                 const LabeledDataset& test, const RunConfig& cfg);

// Per-sample variant: every low-confidence sample gets its own rollback and
// auxiliary task built from its own predicted distribution.
TransitionReport run_online(const LayeredModel& model, const LabeledDataset& train,
                            const LabeledDataset& test, const RunConfig& cfg);

}  // namespace cliloop
