#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cliloop/matrix.hpp"
#include "cliloop/model.hpp"

namespace cliloop {

struct LabeledDataset {
    Matrix features;          // m x d
    std::vector<int> labels;  // m, each in [0, class_count)
    int class_count = 0;
    std::vector<int> superclass_map;  // class -> superclass id; may be empty

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
};

// Synthetic fine-grained layout: well-separated superclass centers, each
// surrounded by a ring of nearby subclass centers whose sample clouds
// overlap. Class id = superclass * subclasses_per + subclass.
struct GeneratorSpec {
    int superclasses = 5;
    int subclasses_per = 8;
    int dim = 32;
    double intra_spread = 3.0;   // subclass center distance from its superclass center
    double inter_spread = 9.0;   // approximate pairwise distance between superclass centers
    int per_class_train = 100;
    int per_class_test = 25;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;

    int class_count() const { return superclasses * subclasses_per; }
};

std::pair<LabeledDataset, LabeledDataset> generate_finegrained(const GeneratorSpec& spec);

enum class CorruptionKind { gaussian_noise };
CorruptionKind corruption_kind_from_string(const std::string& name);

// Per-unit-severity noise scale; frozen from a one-off calibration run so
// severity 3 roughly halves the default base model's accuracy
// (fixtures/severity_calibration.json records that run).
extern const double kSeverityUnitSigma;

LabeledDataset corrupt(const LabeledDataset& dataset, CorruptionKind kind, int severity,
                       std::uint64_t seed);

struct ModelSpec {
    std::vector<std::size_t> hidden = {24, 16, 12};
    // < 0 selects the default boundary: floor(L / 2) shallow groups.
    int split_index = -1;
};

struct TrainOptions {
    std::size_t batch_size = 64;
    double base_lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
};

LayeredModel train_base(const ModelSpec& spec, const LabeledDataset& train, int epochs,
                        std::uint64_t seed, const TrainOptions& options = {});

double top1_accuracy(const LayeredModel& model, const LabeledDataset& data);
double topk_accuracy(const LayeredModel& model, const LabeledDataset& data, std::size_t k);
// Mean cross-entropy over the dataset.
double dataset_ce_loss(const LayeredModel& model, const LabeledDataset& data);

// CSV: header "label,f0,...,f{d-1}", one sample per row, doubles printed
// with round-trip precision. Binary twin: magic "CLIDATA1" header.
void save_dataset_csv(const LabeledDataset& data, const std::string& path);
LabeledDataset load_dataset_csv(const std::string& path);
void save_dataset_binary(const LabeledDataset& data, const std::string& path);
LabeledDataset load_dataset_binary(const std::string& path);

}  // namespace cliloop
