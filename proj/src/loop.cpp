#include "cliloop/loop.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "cliloop/losses.hpp"
#include "cliloop/optimizer.hpp"
#include "cliloop/rng.hpp"

namespace cliloop {

std::string to_string(LoopMode mode) {
    return mode == LoopMode::cluster ? "cluster" : "online";
}

LoopMode loop_mode_from_string(const std::string& name) {
    if (name == "cluster") return LoopMode::cluster;
    if (name == "online") return LoopMode::online;
    throw std::invalid_argument("unknown mode: " + name);
}

std::string to_string(Transition t) {
    switch (t) {
        case Transition::f2t: return "f2t";
        case Transition::t2f: return "t2f";
        case Transition::f2f: return "f2f";
        case Transition::t2t: return "t2t";
    }
    return "?";
}

AuxTask build_aux_task(const std::vector<int>& train_labels, int class_count,
                       const Vector& center, std::size_t k, double proportion,
                       std::uint64_t seed) {
    if (k == 0) throw std::invalid_argument("build_aux_task: k must be positive");
    if (proportion <= 0.0 || proportion > 1.0)
        throw std::invalid_argument("build_aux_task: proportion must be in (0, 1]");
    if (center.size() != static_cast<std::size_t>(class_count))
        throw std::invalid_argument("build_aux_task: center length != class count");

    AuxTask task;
    task.proportion = proportion;
    task.class_set = top_k_classes(center, k);

    std::vector<char> selected(static_cast<std::size_t>(class_count), 0);
    for (int c : task.class_set) selected[static_cast<std::size_t>(c)] = 1;

    std::vector<std::vector<int>> per_class(static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < train_labels.size(); ++i) {
        const int y = train_labels[i];
        if (y >= 0 && y < class_count && selected[static_cast<std::size_t>(y)])
            per_class[static_cast<std::size_t>(y)].push_back(static_cast<int>(i));
    }
    for (int c : task.class_set)
        if (per_class[static_cast<std::size_t>(c)].empty())
            std::cerr << "warning: auxiliary class " << c << " has no training samples\n";

    std::size_t total = 0;
    for (int c : task.class_set) total += per_class[static_cast<std::size_t>(c)].size();

    if (proportion >= 1.0) {
        for (int c : task.class_set)
            for (int i : per_class[static_cast<std::size_t>(c)]) task.sample_ids.push_back(i);
        std::sort(task.sample_ids.begin(), task.sample_ids.end());
        return task;
    }

    // Subsample to exactly ceil(proportion * total), spread over classes:
    // floor(p * n_c) each, remainder to the largest fractional parts.
    const auto target = static_cast<std::size_t>(
        std::ceil(proportion * static_cast<double>(total) - 1e-12));
    std::vector<int> classes_sorted = task.class_set;
    std::sort(classes_sorted.begin(), classes_sorted.end());
    std::vector<std::size_t> quota;
    std::vector<double> frac;
    std::size_t assigned = 0;
    for (int c : classes_sorted) {
        const double want = proportion * static_cast<double>(per_class[static_cast<std::size_t>(c)].size());
        const auto q = static_cast<std::size_t>(std::floor(want + 1e-12));
        quota.push_back(q);
        frac.push_back(want - static_cast<double>(q));
        assigned += q;
    }
    std::size_t remainder = target > assigned ? target - assigned : 0;
    while (remainder > 0) {
        std::size_t best = classes_sorted.size();
        double best_frac = -1.0;
        for (std::size_t idx = 0; idx < classes_sorted.size(); ++idx) {
            const auto cap = per_class[static_cast<std::size_t>(classes_sorted[idx])].size();
            if (quota[idx] >= cap) continue;
            if (frac[idx] > best_frac) {
                best_frac = frac[idx];
                best = idx;
            }
        }
        if (best == classes_sorted.size()) break;
        ++quota[best];
        frac[best] = -2.0;  // each class gets at most one remainder slot per sweep
        --remainder;
    }

    Rng rng(seed);
    for (std::size_t idx = 0; idx < classes_sorted.size(); ++idx) {
        std::vector<int> pool = per_class[static_cast<std::size_t>(classes_sorted[idx])];
        const std::size_t take = quota[idx];
        // partial Fisher-Yates: the first `take` entries become the sample
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(pool.size() - i));
            std::swap(pool[i], pool[j]);
        }
        for (std::size_t i = 0; i < take; ++i) task.sample_ids.push_back(pool[i]);
    }
    std::sort(task.sample_ids.begin(), task.sample_ids.end());
    return task;
}

void auxiliary_train(LayeredModel& model, const LabeledDataset& train, const AuxTask& task,
                     const RunConfig& cfg, std::uint64_t seed) {
    if (task.sample_ids.empty()) {
        std::cerr << "warning: empty auxiliary set; skipping training\n";
        return;
    }
    if (cfg.epochs <= 0) return;

    const std::size_t n = task.sample_ids.size();
    const auto batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;

    const std::size_t group_count = model.group_count();
    std::size_t first_group = 0;
    if (cfg.trainable_suffix > 0) {
        const auto suffix = static_cast<std::size_t>(cfg.trainable_suffix);
        if (suffix > group_count)
            throw std::invalid_argument("auxiliary_train: trainable_suffix exceeds group count");
        first_group = group_count - suffix;
    }

    SgdConfig sgd;
    sgd.base_lr = cfg.base_lr;
    sgd.momentum = cfg.momentum;
    sgd.weight_decay = cfg.weight_decay;
    sgd.total_steps = static_cast<std::size_t>(cfg.epochs) * steps_per_epoch;
    SgdOptimizer opt(model, first_group, sgd);

    SclConfig scl;
    scl.tau = cfg.tau;
    scl.lambda = cfg.lambda;

    Rng rng(seed);
    std::vector<int> order = task.sample_ids;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t count = std::min(batch, n - start);
            Batch b;
            b.inputs = Matrix(count, train.dim());
            b.labels.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const auto src = static_cast<std::size_t>(order[start + i]);
                std::memcpy(b.inputs.row_ptr(i), train.features.row_ptr(src),
                            train.dim() * sizeof(double));
                b.labels[i] = train.labels[src];
            }
            if (cfg.jitter_sigma > 0.0)
                for (double& x : b.inputs.data()) x += cfg.jitter_sigma * rng.normal();
            CombinedResult res = combined_objective(model, b, scl, first_group);
            opt.step(model, res.grads);
        }
    }
}

namespace {

struct ClusterWork {
    std::vector<int> member_ids;  // test sample ids
    Vector center;
};

int argmax_prediction(const Vector& logits, const std::vector<int>* allowed) {
    if (allowed == nullptr) {
        int best = 0;
        for (std::size_t j = 1; j < logits.size(); ++j)
            if (logits[j] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
        return best;
    }
    int best = -1;
    for (int c : *allowed) {
        if (best < 0 || logits[static_cast<std::size_t>(c)] > logits[static_cast<std::size_t>(best)] ||
            (logits[static_cast<std::size_t>(c)] == logits[static_cast<std::size_t>(best)] && c < best))
            best = c;
    }
    return best;
}

void validate_config(const RunConfig& cfg) {
    if (cfg.clusters < 1) throw std::invalid_argument("run: clusters must be positive");
    if (cfg.top_k < 1) throw std::invalid_argument("run: top_k must be positive");
    if (cfg.epochs < 0) throw std::invalid_argument("run: epochs must be nonnegative");
    if (cfg.batch_size < 1) throw std::invalid_argument("run: batch_size must be positive");
    if (cfg.jobs < 1) throw std::invalid_argument("run: jobs must be positive");
    if (cfg.proportion <= 0.0 || cfg.proportion > 1.0)
        throw std::invalid_argument("run: proportion must be in (0, 1]");
}

TransitionReport run_loop_impl(const LayeredModel& model, const LabeledDataset& train,
                               const LabeledDataset& test, const RunConfig& cfg,
                               LoopMode mode) {
    validate_config(cfg);
    if (model.input_dim() != test.dim() || model.input_dim() != train.dim())
        throw std::invalid_argument("run: model input width does not match dataset");
    if (model.class_count() != static_cast<std::size_t>(train.class_count) ||
        model.class_count() != static_cast<std::size_t>(test.class_count))
        throw std::invalid_argument("run: model class count does not match dataset");

    const auto t_start = std::chrono::steady_clock::now();

    TransitionReport report;
    report.config = cfg;
    report.config.mode = mode;
    report.test_count = test.size();
    report.model_digest_before = model.digest_all();

    std::vector<Prediction> baseline = predict_batch(model, test.features, cfg.score_kind);
    SplitResult split = split_by_confidence(baseline, cfg.epsilon);
    report.low_count = split.low_ids.size();
    report.high_count = split.high_ids.size();
    report.split_threshold = split.threshold;

    std::vector<int> final_top1(test.size());
    std::vector<int> cluster_of(test.size(), -1);
    for (const Prediction& p : baseline)
        final_top1[static_cast<std::size_t>(p.sample_id)] = p.top1();

    if (!split.low_ids.empty()) {
        std::vector<int> low_ids = split.low_ids;
        std::sort(low_ids.begin(), low_ids.end());

        std::vector<ClusterWork> work;
        if (mode == LoopMode::online) {
            // one task per sample, built from its own predicted distribution
            for (int id : low_ids) {
                ClusterWork w;
                w.member_ids.push_back(id);
                w.center = baseline[static_cast<std::size_t>(id)].probs;
                work.push_back(std::move(w));
            }
        } else {
            Matrix low_rows(low_ids.size(), model.class_count());
            for (std::size_t i = 0; i < low_ids.size(); ++i)
                low_rows.set_row(i, baseline[static_cast<std::size_t>(low_ids[i])].probs);
            const auto q = std::min<std::size_t>(static_cast<std::size_t>(cfg.clusters),
                                                 low_ids.size());
            ClusterSet clusters =
                kmeans_rows(low_rows, q, derive_seed(cfg.seed, "kmeans"), 100);
            for (const Cluster& cl : clusters.clusters) {
                ClusterWork w;
                for (std::size_t r : cl.member_rows) w.member_ids.push_back(low_ids[r]);
                w.center = cl.center;
                work.push_back(std::move(w));
            }
        }
        report.cluster_count = work.size();
        report.cluster_pre_digests.assign(work.size(), 0);

        const ParamSnapshot snapshot = snapshot_deep(model);
        report.snapshot_digest = snapshot.digest;

        std::vector<std::vector<std::pair<int, int>>> results(work.size());
        std::vector<std::string> errors(work.size());
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};

        auto run_cluster = [&](std::size_t ci) {
            const ClusterWork& w = work[ci];
            LayeredModel worker = model;
            restore_deep(worker, snapshot);
            report.cluster_pre_digests[ci] = worker.digest_deep();
            AuxTask task = build_aux_task(train.labels, train.class_count, w.center,
                                          static_cast<std::size_t>(cfg.top_k), cfg.proportion,
                                          derive_seed(cfg.seed, "aux", ci));
            auxiliary_train(worker, train, task, cfg, derive_seed(cfg.seed, "train", ci));
            const std::vector<int>* allowed = cfg.restrict_top_k ? &task.class_set : nullptr;
            for (int id : w.member_ids) {
                auto [z, logits] = worker.forward(test.features.row(static_cast<std::size_t>(id)));
                (void)z;
                results[ci].push_back({id, argmax_prediction(logits, allowed)});
            }
        };

        const auto jobs = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), work.size());
        if (jobs <= 1) {
            for (std::size_t ci = 0; ci < work.size(); ++ci) {
                try {
                    run_cluster(ci);
                } catch (const std::exception& e) {
                    throw std::runtime_error("cluster " + std::to_string(ci) +
                                             " failed: " + e.what());
                }
            }
        } else {
            auto worker_fn = [&]() {
                while (true) {
                    const std::size_t ci = next.fetch_add(1);
                    if (ci >= work.size()) return;
                    try {
                        run_cluster(ci);
                    } catch (const std::exception& e) {
                        errors[ci] = e.what();
                        failed.store(true);
                    }
                }
            };
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker_fn);
            for (std::thread& t : pool) t.join();
            if (failed.load()) {
                for (std::size_t ci = 0; ci < errors.size(); ++ci)
                    if (!errors[ci].empty())
                        throw std::runtime_error("cluster " + std::to_string(ci) +
                                                 " failed: " + errors[ci]);
            }
        }

        for (std::size_t ci = 0; ci < work.size(); ++ci) {
            for (const auto& [id, top1] : results[ci]) {
                final_top1[static_cast<std::size_t>(id)] = top1;
                cluster_of[static_cast<std::size_t>(id)] = static_cast<int>(ci);
            }
        }
    }

    report.model_digest_after = model.digest_all();

    std::vector<char> is_low(test.size(), 0);
    for (int id : split.low_ids) is_low[static_cast<std::size_t>(id)] = 1;

    std::size_t baseline_hits = 0, final_hits = 0;
    report.per_sample.reserve(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        SampleOutcome o;
        o.sample_id = static_cast<int>(i);
        o.label = test.labels[i];
        o.confidence = baseline[i].confidence;
        o.baseline_top1 = baseline[i].top1();
        o.final_top1 = final_top1[i];
        o.low_confidence = is_low[i] != 0;
        o.cluster_id = cluster_of[i];
        const bool was = o.baseline_top1 == o.label;
        const bool now = o.final_top1 == o.label;
        if (was && now) { o.transition = Transition::t2t; ++report.t2t; }
        else if (was && !now) { o.transition = Transition::t2f; ++report.t2f; }
        else if (!was && now) { o.transition = Transition::f2t; ++report.f2t; }
        else { o.transition = Transition::f2f; ++report.f2f; }
        baseline_hits += was ? 1 : 0;
        final_hits += now ? 1 : 0;
        report.per_sample.push_back(o);
    }
    report.baseline_acc = static_cast<double>(baseline_hits) / static_cast<double>(test.size());
    report.final_acc = static_cast<double>(final_hits) / static_cast<double>(test.size());

    const auto t_end = std::chrono::steady_clock::now();
    report.tpi_seconds = std::chrono::duration<double>(t_end - t_start).count() /
                         static_cast<double>(test.size());
    return report;
}

}  // namespace

TransitionReport run_closed_loop(const LayeredModel& model, const LabeledDataset& train,
                                 const LabeledDataset& test, const RunConfig& cfg) {
    return run_loop_impl(model, train, test, cfg, LoopMode::cluster);
}

TransitionReport run_online(const LayeredModel& model, const LabeledDataset& train,
                            const LabeledDataset& test, const RunConfig& cfg) {
    return run_loop_impl(model, train, test, cfg, LoopMode::online);
}

}  // namespace cliloop
