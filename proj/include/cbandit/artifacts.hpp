#pragma once

// On-disk results: curves.csv, summary.json, sweep.csv and manifest.json.
// Floating-point CSV fields use 17 significant digits.

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "cbandit/config.hpp"
#include "cbandit/harness.hpp"

namespace cbandit {

inline constexpr int kCurvesSchema = 1;
inline constexpr int kSummarySchema = 1;
inline constexpr int kSweepSchema = 1;

const char* code_version();

/// Long format, one row per (model, seed, agent, step), in that order.
void write_curves_csv(std::ostream& out, const ExperimentSummary& summary);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

std::string summary_json(const ExperimentSummary& summary);
/// Reads back what summary_json wrote; runs carry no curves.
ExperimentSummary parse_summary_json(const std::string& text);
ExperimentSummary read_summary(const std::filesystem::path& path);

std::string manifest_json(const ExperimentConfig& cfg, const std::string& command);

/// Runs the experiment and writes curves.csv, summary.json and manifest.json
/// into cfg.output.dir. Files written before a failure are removed.
ExperimentSummary cmd_run(const ExperimentConfig& cfg, unsigned workers);

/// Checkpoint sweep; writes sweep.csv and manifest.json.
std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, unsigned workers);

struct SelectReport {
    ModelSelection selection;
    std::vector<double> regret_a;
    std::vector<double> regret_b;
};

SelectReport cmd_select(const std::filesystem::path& dir, const std::string& agent_a, const std::string& agent_b,
                        SelectMode mode);

/// Ratio table followed by the selected model.
void print_select_report(std::ostream& out, const SelectReport& report, const std::string& agent_a,
                         const std::string& agent_b);

}  // namespace cbandit
