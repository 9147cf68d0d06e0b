#pragma once

// Experiment configuration: a YAML document describing the environment,
// agents, replication counts and outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cbandit/agent.hpp"
#include "cbandit/environment.hpp"
#include "cbandit/harness.hpp"

namespace cbandit {

inline constexpr int kSchemaVersion = 1;

struct EnvConfig {
    ModelKind kind = ModelKind::bernoulli_mab;
    std::int64_t k = 10;
    double mean_low = 0.25;
    double mean_high = 0.75;
    std::int64_t dim = 10;
    double noise_sd = 0.1;
    std::string path;  // dataset file

    bool operator==(const EnvConfig&) const = default;
};

/// A fixed period or an explicit list; both absent means every step.
struct ScheduleConfig {
    std::optional<std::int64_t> period;
    std::vector<std::int64_t> times;

    bool empty() const { return !period && times.empty(); }
    CheckpointSchedule schedule() const;
    bool operator==(const ScheduleConfig&) const = default;
};

struct SweepSpec {
    std::int64_t count = 15;
    std::int64_t start = 1;
    std::optional<std::int64_t> end;  // defaults to the horizon

    bool operator==(const SweepSpec&) const = default;
};

struct AgentEntry {
    std::string label;
    Variant variant = Variant::clucb2;
    std::optional<double> alpha, delta, lambda;
    ScheduleConfig checkpoints;

    bool operator==(const AgentEntry&) const = default;
};

struct OutputConfig {
    std::string dir = "out";
    std::int64_t curve_points = 500;

    bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    EnvConfig env;
    std::int64_t horizon = 1000;
    double alpha = 0.05;
    double delta = 0.01;
    double lambda = 0.5;
    std::int64_t baseline_rank = 1;
    std::vector<AgentEntry> agents;
    std::int64_t n_models = 1;
    std::int64_t n_seeds = 1;
    std::uint64_t root_seed = 0;
    ScheduleConfig checkpoints;
    std::optional<SweepSpec> sweep;
    OutputConfig output;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError naming the offending field path and line.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config(const std::filesystem::path& path);

/// YAML text that parses back to an equal config.
std::string serialize_config(const ExperimentConfig& cfg);

/// Range checks that do not depend on where a field came from.
void validate_config(const ExperimentConfig& cfg);

/// Agent specs with top-level values filled in where an agent has no override.
std::vector<AgentSpec> resolve_agents(const ExperimentConfig& cfg);

/// Base spec for checkpoint sweeps (alpha, delta, lambda from the top level).
AgentSpec sweep_base(const ExperimentConfig& cfg);

/// Checkpoint periods of the sweep: rounded log-spacing, unique, ascending.
std::vector<std::int64_t> sweep_periods(const ExperimentConfig& cfg);

/// Builds models for replicate(). Dataset configs read the file once and
/// assign users drawn without replacement to model indices.
ModelFactory make_model_factory(const ExperimentConfig& cfg);

}  // namespace cbandit
