#include "cliloop/reporting.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "cliloop/digest.hpp"
#include "json.hpp"

namespace cliloop {

namespace {

nlohmann::json config_to_json(const RunConfig& cfg) {
    return nlohmann::json{
        {"epsilon", cfg.epsilon},
        {"clusters", cfg.clusters},
        {"topk", cfg.top_k},
        {"lambda", cfg.lambda},
        {"tau", cfg.tau},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"base_lr", cfg.base_lr},
        {"momentum", cfg.momentum},
        {"weight_decay", cfg.weight_decay},
        {"proportion", cfg.proportion},
        {"trainable_suffix", cfg.trainable_suffix},
        {"score_kind", to_string(cfg.score_kind)},
        {"mode", to_string(cfg.mode)},
        {"seed", cfg.seed},
        {"jobs", cfg.jobs},
        {"jitter_sigma", cfg.jitter_sigma},
        {"restrict_topk", cfg.restrict_top_k},
    };
}

}  // namespace

std::string report_to_json(const TransitionReport& r) {
    nlohmann::json j;
    j["config"] = config_to_json(r.config);
    j["test_count"] = r.test_count;
    j["low_count"] = r.low_count;
    j["high_count"] = r.high_count;
    j["cluster_count"] = r.cluster_count;
    j["split_threshold"] = r.split_threshold;
    j["baseline_acc"] = r.baseline_acc;
    j["final_acc"] = r.final_acc;
    j["counts"] = {{"f2t", r.f2t}, {"t2f", r.t2f}, {"f2f", r.f2f}, {"t2t", r.t2t}};
    j["tpi_seconds"] = r.tpi_seconds;
    j["model_digest_before"] = digest_hex(r.model_digest_before);
    j["model_digest_after"] = digest_hex(r.model_digest_after);
    j["snapshot_digest"] = digest_hex(r.snapshot_digest);
    bool pre_ok = true;
    for (std::uint64_t d : r.cluster_pre_digests)
        if (d != r.snapshot_digest) pre_ok = false;
    j["cluster_pre_digests_match"] = pre_ok;
    nlohmann::json samples = nlohmann::json::array();
    for (const SampleOutcome& o : r.per_sample) {
        samples.push_back({{"id", o.sample_id},
                           {"label", o.label},
                           {"confidence", o.confidence},
                           {"low", o.low_confidence},
                           {"cluster", o.cluster_id},
                           {"baseline_top1", o.baseline_top1},
                           {"final_top1", o.final_top1},
                           {"transition", to_string(o.transition)}});
    }
    j["per_sample"] = std::move(samples);
    return j.dump(2);
}

void write_report_json(const TransitionReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot open for writing: " + path);
    out << report_to_json(report) << "\n";
    if (!out) throw std::runtime_error("report: write failed: " + path);
}

void write_report_csv(const TransitionReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot open for writing: " + path);
    out << "id,label,confidence,low,cluster,baseline_top1,final_top1,transition\n";
    char buf[40];
    for (const SampleOutcome& o : report.per_sample) {
        std::snprintf(buf, sizeof(buf), "%.17g", o.confidence);
        out << o.sample_id << ',' << o.label << ',' << buf << ',' << (o.low_confidence ? 1 : 0)
            << ',' << o.cluster_id << ',' << o.baseline_top1 << ',' << o.final_top1 << ','
            << to_string(o.transition) << "\n";
    }
    if (!out) throw std::runtime_error("report: write failed: " + path);
}

std::string summary_text(const TransitionReport& r) {
    std::ostringstream out;
    const double delta = (r.final_acc - r.baseline_acc) * 100.0;
    out.setf(std::ios::fixed);
    out.precision(2);
    out << "mode " << to_string(r.config.mode) << " | score " << to_string(r.config.score_kind)
        << " | epsilon " << r.config.epsilon << "\n";
    out << "test " << r.test_count << " | low " << r.low_count << " | high " << r.high_count
        << " | clusters " << r.cluster_count << "\n";
    out << "baseline acc " << r.baseline_acc * 100.0 << "% | final acc " << r.final_acc * 100.0
        << "% (" << (delta >= 0 ? "+" : "") << delta << ")\n";
    out << "#F2T " << r.f2t << " | #T2F " << r.t2f << " | #F2F " << r.f2f << " | #T2T " << r.t2t
        << "\n";
    out.precision(4);
    out << "TPI " << r.tpi_seconds << " s/sample\n";
    return out.str();
}

RunConfig config_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("report: cannot open: " + path);
    nlohmann::json j;
    in >> j;
    const nlohmann::json& c = j.contains("config") ? j.at("config") : j;
    RunConfig cfg;
    cfg.epsilon = c.at("epsilon").get<double>();
    cfg.clusters = c.at("clusters").get<int>();
    cfg.top_k = c.at("topk").get<int>();
    cfg.lambda = c.at("lambda").get<double>();
    cfg.tau = c.at("tau").get<double>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.base_lr = c.at("base_lr").get<double>();
    cfg.momentum = c.at("momentum").get<double>();
    cfg.weight_decay = c.at("weight_decay").get<double>();
    cfg.proportion = c.at("proportion").get<double>();
    cfg.trainable_suffix = c.at("trainable_suffix").get<int>();
    cfg.score_kind = score_kind_from_string(c.at("score_kind").get<std::string>());
    cfg.mode = loop_mode_from_string(c.at("mode").get<std::string>());
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.jobs = c.at("jobs").get<int>();
    cfg.jitter_sigma = c.at("jitter_sigma").get<double>();
    cfg.restrict_top_k = c.at("restrict_topk").get<bool>();
    return cfg;
}

}  // namespace cliloop
