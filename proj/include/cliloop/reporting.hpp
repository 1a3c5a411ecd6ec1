#pragma once

#include <string>

#include "cliloop/loop.hpp"

namespace cliloop {

// JSON document with counts, accuracies, the resolved config, digests, and
// per-sample transitions. tpi_seconds is the only field expected to vary
// between identical runs.
std::string report_to_json(const TransitionReport& report);
void write_report_json(const TransitionReport& report, const std::string& path);

// Flat per-sample rows: id,label,confidence,low,cluster,baseline_top1,final_top1,transition
void write_report_csv(const TransitionReport& report, const std::string& path);

// One-block summary for the terminal.
std::string summary_text(const TransitionReport& report);

// Parses the "config" object of an emitted report back into a RunConfig.
RunConfig config_from_json_file(const std::string& path);

}  // namespace cliloop
