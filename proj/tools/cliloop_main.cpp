#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <map>

#include "CLI11.hpp"
#include "cliloop/datasets.hpp"
#include "cliloop/loop.hpp"
#include "cliloop/reporting.hpp"
#include "cliloop/selection.hpp"

namespace fs = std::filesystem;
using namespace cliloop;

namespace {

LabeledDataset load_dataset_any(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".bin")
        return load_dataset_binary(path);
    return load_dataset_csv(path);
}

void save_dataset_pair(const LabeledDataset& data, const fs::path& dir, const std::string& stem) {
    const fs::path csv = dir / (stem + ".csv");
    const fs::path bin = dir / (stem + ".bin");
    save_dataset_csv(data, csv.string());
    save_dataset_binary(data, bin.string());
    std::cout << csv.string() << "\n" << bin.string() << "\n";
}

std::vector<std::size_t> parse_hidden(const std::string& text) {
    std::vector<std::size_t> out;
    std::string token;
    for (char ch : text + ",") {
        if (ch == ',') {
            if (!token.empty()) out.push_back(static_cast<std::size_t>(std::stoul(token)));
            token.clear();
        } else {
            token += ch;
        }
    }
    if (out.empty()) throw CLI::ValidationError("--hidden", "expected comma-separated widths");
    return out;
}

struct RunFlags {
    RunConfig cfg;
    std::string score_name = "softmax_max";
    std::string mode_name = "cluster";
    std::string config_path;

    void resolve() {
        cfg.score_kind = score_kind_from_string(score_name);
        cfg.mode = loop_mode_from_string(mode_name);
    }
};

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::runtime_error("config: expected a boolean, got '" + v + "'");
}

// key = value lines; a flag given on the command line wins over the file.
void apply_config_file(CLI::App* cmd, RunFlags& flags) {
    if (flags.config_path.empty()) return;
    std::ifstream in(flags.config_path);
    if (!in) throw std::runtime_error("config: cannot open: " + flags.config_path);

    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: expected key = value, got '" + line + "'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }

    auto take = [&](const std::string& key, auto&& apply) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        if (cmd->count("--" + key) == 0) apply(it->second);
        kv.erase(it);
    };
    take("epsilon", [&](const std::string& v) { flags.cfg.epsilon = std::stod(v); });
    take("clusters", [&](const std::string& v) { flags.cfg.clusters = std::stoi(v); });
    take("topk", [&](const std::string& v) { flags.cfg.top_k = std::stoi(v); });
    take("lambda", [&](const std::string& v) { flags.cfg.lambda = std::stod(v); });
    take("tau", [&](const std::string& v) { flags.cfg.tau = std::stod(v); });
    take("epochs", [&](const std::string& v) { flags.cfg.epochs = std::stoi(v); });
    take("batch-size", [&](const std::string& v) { flags.cfg.batch_size = std::stoi(v); });
    take("base-lr", [&](const std::string& v) { flags.cfg.base_lr = std::stod(v); });
    take("momentum", [&](const std::string& v) { flags.cfg.momentum = std::stod(v); });
    take("weight-decay", [&](const std::string& v) { flags.cfg.weight_decay = std::stod(v); });
    take("proportion", [&](const std::string& v) { flags.cfg.proportion = std::stod(v); });
    take("suffix", [&](const std::string& v) { flags.cfg.trainable_suffix = std::stoi(v); });
    take("score", [&](const std::string& v) { flags.score_name = v; });
    take("mode", [&](const std::string& v) { flags.mode_name = v; });
    take("seed", [&](const std::string& v) { flags.cfg.seed = std::stoull(v); });
    take("jobs", [&](const std::string& v) { flags.cfg.jobs = std::stoi(v); });
    take("jitter-sigma", [&](const std::string& v) { flags.cfg.jitter_sigma = std::stod(v); });
    take("restrict-topk", [&](const std::string& v) { flags.cfg.restrict_top_k = parse_bool(v); });
    if (!kv.empty())
        throw std::runtime_error("config: unknown key '" + kv.begin()->first + "'");
}

void add_run_options(CLI::App* cmd, RunFlags& flags) {
    cmd->add_option("--epsilon", flags.cfg.epsilon, "Confidence threshold")->capture_default_str();
    cmd->add_option("--clusters", flags.cfg.clusters, "Cluster count Q (clamped to the low set)")
        ->capture_default_str();
    cmd->add_option("--topk", flags.cfg.top_k, "Class count K of each auxiliary task")
        ->capture_default_str();
    cmd->add_option("--lambda", flags.cfg.lambda, "Contrastive loss weight")->capture_default_str();
    cmd->add_option("--tau", flags.cfg.tau, "Contrastive temperature")->capture_default_str();
    cmd->add_option("--epochs", flags.cfg.epochs, "Auxiliary training epochs")->capture_default_str();
    cmd->add_option("--batch-size", flags.cfg.batch_size, "Auxiliary batch size")
        ->capture_default_str();
    cmd->add_option("--base-lr", flags.cfg.base_lr, "Initial learning rate")->capture_default_str();
    cmd->add_option("--momentum", flags.cfg.momentum, "SGD momentum")->capture_default_str();
    cmd->add_option("--weight-decay", flags.cfg.weight_decay, "SGD weight decay")
        ->capture_default_str();
    cmd->add_option("--proportion", flags.cfg.proportion, "Fraction of each auxiliary class kept")
        ->capture_default_str();
    cmd->add_option("--suffix", flags.cfg.trainable_suffix,
                    "Trailing layer groups to fine-tune (0 = all)")
        ->capture_default_str();
    cmd->add_option("--score", flags.score_name, "softmax_max | entropy | energy")
        ->capture_default_str();
    cmd->add_option("--mode", flags.mode_name, "cluster | online")->capture_default_str();
    cmd->add_option("--seed", flags.cfg.seed, "Master seed")
        ->envname("CLILOOP_SEED")
        ->capture_default_str();
    cmd->add_option("--jobs", flags.cfg.jobs, "Worker threads for cluster training")
        ->capture_default_str();
    cmd->add_option("--jitter-sigma", flags.cfg.jitter_sigma,
                    "Gaussian input jitter during auxiliary training")
        ->capture_default_str();
    cmd->add_flag("--restrict-topk", flags.cfg.restrict_top_k,
                  "Restrict final argmax to the auxiliary class set");
    cmd->add_option("--config", flags.config_path,
                    "key = value config file; explicit flags take precedence");
}

void check_compat(const LayeredModel& model, const LabeledDataset& data, const std::string& name) {
    if (model.input_dim() != data.dim())
        throw std::runtime_error(name + ": feature width " + std::to_string(data.dim()) +
                                 " does not match checkpoint input dim " +
                                 std::to_string(model.input_dim()));
    if (model.class_count() != static_cast<std::size_t>(data.class_count))
        throw std::runtime_error(name + ": class count " + std::to_string(data.class_count) +
                                 " does not match checkpoint class count " +
                                 std::to_string(model.class_count()));
}

int cmd_gen_data(const GeneratorSpec& spec, const std::string& out_dir, int severity,
                 const std::string& corruption_name) {
    fs::create_directories(out_dir);
    auto [train, test] = generate_finegrained(spec);
    save_dataset_pair(train, out_dir, "train");
    save_dataset_pair(test, out_dir, "test");
    if (severity > 0) {
        const CorruptionKind kind = corruption_kind_from_string(corruption_name);
        LabeledDataset corrupted = corrupt(test, kind, severity, spec.seed);
        save_dataset_pair(corrupted, out_dir, "test_corrupt" + std::to_string(severity));
    }
    return 0;
}

int cmd_train(const std::string& train_path, const std::string& eval_path,
              const std::string& out_path, const std::string& hidden, int split_index,
              int epochs, std::uint64_t seed, const TrainOptions& options) {
    LabeledDataset train = load_dataset_any(train_path);
    ModelSpec spec;
    spec.hidden = parse_hidden(hidden);
    spec.split_index = split_index;
    LayeredModel model = train_base(spec, train, epochs, seed, options);
    if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty())
        fs::create_directories(parent);
    save_checkpoint(model, out_path);
    std::printf("checkpoint: %s\n", out_path.c_str());
    std::printf("train top-1 %.4f | top-5 %.4f\n", top1_accuracy(model, train),
                topk_accuracy(model, train, 5));
    if (!eval_path.empty()) {
        LabeledDataset eval = load_dataset_any(eval_path);
        check_compat(model, eval, "eval set");
        std::printf("eval  top-1 %.4f | top-5 %.4f\n", top1_accuracy(model, eval),
                    topk_accuracy(model, eval, 5));
    }
    return 0;
}

TransitionReport dispatch_run(const LayeredModel& model, const LabeledDataset& train,
                              const LabeledDataset& test, const RunConfig& cfg) {
    return cfg.mode == LoopMode::online ? run_online(model, train, test, cfg)
                                        : run_closed_loop(model, train, test, cfg);
}

int cmd_run(CLI::App* cmd, const std::string& model_path, const std::string& train_path,
            const std::string& test_path, const std::string& out_dir, RunFlags& flags) {
    apply_config_file(cmd, flags);
    flags.resolve();
    LayeredModel model = load_checkpoint(model_path);
    LabeledDataset train = load_dataset_any(train_path);
    LabeledDataset test = load_dataset_any(test_path);
    check_compat(model, train, "train set");
    check_compat(model, test, "test set");
    fs::create_directories(out_dir);

    TransitionReport report = dispatch_run(model, train, test, flags.cfg);
    write_report_json(report, (fs::path(out_dir) / "report.json").string());
    write_report_csv(report, (fs::path(out_dir) / "report.csv").string());
    std::cout << summary_text(report);

    if (flags.cfg.mode == LoopMode::online &&
        report.low_count > 0 &&
        static_cast<std::size_t>(flags.cfg.clusters) >= report.low_count) {
        // singleton regime: the cluster path must reproduce the online result
        RunConfig cluster_cfg = flags.cfg;
        cluster_cfg.mode = LoopMode::cluster;
        TransitionReport twin = run_closed_loop(model, train, test, cluster_cfg);
        bool equal = twin.per_sample.size() == report.per_sample.size();
        if (equal)
            for (std::size_t i = 0; i < twin.per_sample.size(); ++i)
                if (twin.per_sample[i].final_top1 != report.per_sample[i].final_top1) equal = false;
        std::cout << "online/cluster equivalence: " << (equal ? "true" : "false") << "\n";
    }

    std::cout << "report: " << (fs::path(out_dir) / "report.json").string() << "\n";
    return 0;
}

int cmd_sweep(CLI::App* cmd, const std::string& model_path, const std::string& train_path,
              const std::string& test_path, const std::string& out_dir, const std::string& axis,
              const std::vector<std::string>& values, RunFlags& flags) {
    apply_config_file(cmd, flags);
    static const std::vector<std::string> kAxes = {"epsilon", "clusters", "topk",
                                                   "epochs",  "proportion", "score", "lambda"};
    if (std::find(kAxes.begin(), kAxes.end(), axis) == kAxes.end())
        throw std::runtime_error("unknown sweep axis: " + axis);
    if (values.empty()) throw std::runtime_error("sweep: empty value list");

    flags.resolve();
    LayeredModel model = load_checkpoint(model_path);
    LabeledDataset train = load_dataset_any(train_path);
    LabeledDataset test = load_dataset_any(test_path);
    check_compat(model, train, "train set");
    check_compat(model, test, "test set");
    fs::create_directories(out_dir);

    const fs::path csv_path = fs::path(out_dir) / ("sweep_" + axis + ".csv");
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("sweep: cannot open " + csv_path.string());
    csv << "value,acc,f2t,t2f,tpi\n";

    std::ofstream curves;
    if (axis == "score") {
        const fs::path curves_path = fs::path(out_dir) / "f1t5_curves.csv";
        curves.open(curves_path);
        if (!curves) throw std::runtime_error("sweep: cannot open " + curves_path.string());
        curves << "prefix_size,ratio,score_kind\n";
    }

    // one knob moves per row; everything else, the seed included, is shared
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        RunConfig cfg = flags.cfg;
        const std::string& value = values[vi];
        if (axis == "epsilon") cfg.epsilon = std::stod(value);
        else if (axis == "clusters") cfg.clusters = std::stoi(value);
        else if (axis == "topk") cfg.top_k = std::stoi(value);
        else if (axis == "epochs") cfg.epochs = std::stoi(value);
        else if (axis == "proportion") cfg.proportion = std::stod(value);
        else if (axis == "lambda") cfg.lambda = std::stod(value);
        else if (axis == "score") cfg.score_kind = score_kind_from_string(value);

        TransitionReport report = dispatch_run(model, train, test, cfg);
        char acc[32], tpi[32];
        std::snprintf(acc, sizeof(acc), "%.6f", report.final_acc);
        std::snprintf(tpi, sizeof(tpi), "%.6f", report.tpi_seconds);
        csv << value << ',' << acc << ',' << report.f2t << ',' << report.t2f << ',' << tpi << "\n";
        write_report_json(report,
                          (fs::path(out_dir) / ("report_" + axis + "_" + value + ".json")).string());

        if (axis == "score") {
            std::vector<Prediction> preds =
                predict_batch(model, test.features, cfg.score_kind);
            for (const RatioPoint& pt : f1t5_ratio_curve(preds, test.labels)) {
                char ratio[32];
                std::snprintf(ratio, sizeof(ratio), "%.6f", pt.ratio);
                curves << pt.prefix_size << ',' << ratio << ',' << value << "\n";
            }
        }
    }
    std::cout << "sweep: " << csv_path.string() << "\n";
    return 0;
}

int cmd_score_analysis(const std::string& model_path, const std::string& test_path,
                       const std::string& out_dir) {
    LayeredModel model = load_checkpoint(model_path);
    LabeledDataset test = load_dataset_any(test_path);
    check_compat(model, test, "test set");
    fs::create_directories(out_dir);
    const fs::path out_path = fs::path(out_dir) / "f1t5_curves.csv";
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("score-analysis: cannot open " + out_path.string());
    out << "prefix_size,ratio,score_kind\n";
    for (ScoreKind kind : {ScoreKind::softmax_max, ScoreKind::entropy, ScoreKind::energy}) {
        std::vector<Prediction> preds = predict_batch(model, test.features, kind);
        for (const RatioPoint& pt : f1t5_ratio_curve(preds, test.labels)) {
            char ratio[32];
            std::snprintf(ratio, sizeof(ratio), "%.6f", pt.ratio);
            out << pt.prefix_size << ',' << ratio << ',' << to_string(kind) << "\n";
        }
    }
    std::cout << "curves: " << out_path.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Confidence-gated test-time fine-tuning loop"};
    app.require_subcommand(1);

    // gen-data
    GeneratorSpec gen_spec;
    std::string gen_out = "out";
    int gen_severity = 0;
    std::string gen_corruption = "gaussian_noise";
    CLI::App* gen = app.add_subcommand("gen-data", "Generate the synthetic benchmark");
    gen->add_option("--out-dir", gen_out, "Output directory")->capture_default_str();
    gen->add_option("--superclasses", gen_spec.superclasses)->capture_default_str();
    gen->add_option("--subclasses", gen_spec.subclasses_per)->capture_default_str();
    gen->add_option("--dim", gen_spec.dim)->capture_default_str();
    gen->add_option("--train-per-class", gen_spec.per_class_train)->capture_default_str();
    gen->add_option("--test-per-class", gen_spec.per_class_test)->capture_default_str();
    gen->add_option("--intra-spread", gen_spec.intra_spread)->capture_default_str();
    gen->add_option("--inter-spread", gen_spec.inter_spread)->capture_default_str();
    gen->add_option("--noise-sigma", gen_spec.noise_sigma)->capture_default_str();
    gen->add_option("--seed", gen_spec.seed)->envname("CLILOOP_SEED")->capture_default_str();
    gen->add_option("--severity", gen_severity, "Also emit a corrupted test split (1..5)")
        ->capture_default_str();
    gen->add_option("--corruption", gen_corruption)->capture_default_str();

    // train
    std::string train_data, train_eval, train_out = "model.ckpt", train_hidden = "24,16,12";
    int train_split = -1, train_epochs = 8;
    std::uint64_t train_seed = 0;
    TrainOptions train_options;
    CLI::App* tr = app.add_subcommand("train", "Train the base classifier");
    tr->add_option("--train", train_data, "Training dataset")->required();
    tr->add_option("--eval", train_eval, "Optional held-out dataset to score");
    tr->add_option("--out", train_out, "Checkpoint path")->capture_default_str();
    tr->add_option("--hidden", train_hidden, "Hidden group widths")->capture_default_str();
    tr->add_option("--split-index", train_split, "Shallow group count (-1 = half)")
        ->capture_default_str();
    tr->add_option("--epochs", train_epochs)->capture_default_str();
    tr->add_option("--batch-size", train_options.batch_size)->capture_default_str();
    tr->add_option("--base-lr", train_options.base_lr)->capture_default_str();
    tr->add_option("--momentum", train_options.momentum)->capture_default_str();
    tr->add_option("--weight-decay", train_options.weight_decay)->capture_default_str();
    tr->add_option("--seed", train_seed)->envname("CLILOOP_SEED")->capture_default_str();

    // run
    std::string run_model, run_train, run_test, run_out = "out";
    RunFlags run_flags;
    CLI::App* run = app.add_subcommand("run", "Run the closed inference loop");
    run->add_option("--model", run_model, "Checkpoint")->required();
    run->add_option("--train", run_train, "Training dataset")->required();
    run->add_option("--test", run_test, "Test dataset")->required();
    run->add_option("--out-dir", run_out)->capture_default_str();
    add_run_options(run, run_flags);

    // sweep
    std::string sweep_model, sweep_train, sweep_test, sweep_out = "out", sweep_axis;
    std::vector<std::string> sweep_values;
    RunFlags sweep_flags;
    CLI::App* sweep = app.add_subcommand("sweep", "Repeat runs along one config axis");
    sweep->add_option("--model", sweep_model)->required();
    sweep->add_option("--train", sweep_train)->required();
    sweep->add_option("--test", sweep_test)->required();
    sweep->add_option("--out-dir", sweep_out)->capture_default_str();
    sweep->add_option("--axis", sweep_axis,
                      "epsilon | clusters | topk | epochs | proportion | score | lambda")
        ->required();
    sweep->add_option("--values", sweep_values, "Comma-separated axis values")
        ->required()
        ->delimiter(',');
    add_run_options(sweep, sweep_flags);

    // score-analysis
    std::string sa_model, sa_test, sa_out = "out";
    CLI::App* sa = app.add_subcommand("score-analysis",
                                      "Emit low-confidence ranking curves per score kind");
    sa->add_option("--model", sa_model)->required();
    sa->add_option("--test", sa_test)->required();
    sa->add_option("--out-dir", sa_out)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_gen_data(gen_spec, gen_out, gen_severity, gen_corruption);
        if (tr->parsed())
            return cmd_train(train_data, train_eval, train_out, train_hidden, train_split,
                             train_epochs, train_seed, train_options);
        if (run->parsed())
            return cmd_run(run, run_model, run_train, run_test, run_out, run_flags);
        if (sweep->parsed())
            return cmd_sweep(sweep, sweep_model, sweep_train, sweep_test, sweep_out, sweep_axis,
                             sweep_values, sweep_flags);
        if (sa->parsed()) return cmd_score_analysis(sa_model, sa_test, sa_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
