#pragma once

// Running agents against environments, seeded replication over models and
// seeds, and the summaries derived from the runs.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cbandit/agent.hpp"
#include "cbandit/environment.hpp"

namespace cbandit {

/// Budgets below this are reported as violations; guards summation-order rounding.
inline constexpr double kBudgetTolerance = 1e-9;

struct RunRecord {
    std::int64_t step = 0;
    Eigen::Index arm = 0;
    double reward = 0.0;
    double regret_increment = 0.0;  // mu* - mu_arm
    double budget = 0.0;            // sum of (mu_arm - (1 - alpha) mu_b)
    double realized_budget = 0.0;   // same with the realized reward in place of mu_arm
    Event event = Event::e3_baseline;
};

/// A named agent with its overrides; resolved against a model by make_agent_config.
struct AgentSpec {
    std::string label;
    Variant variant = Variant::clucb2;
    double alpha = 0.05;
    double delta = 0.01;
    double lambda = 0.5;
    CheckpointSchedule checkpoints;
};

AgentConfig make_agent_config(const AgentSpec& spec, const BanditModel& model);

/// Streams every step of one run to `sink`. Deterministic in (model, config, seed).
void simulate(const BanditModel& model, const AgentConfig& config, std::int64_t horizon, std::uint64_t seed,
              const std::function<void(const RunRecord&, const AgentDecision&)>& sink);

std::vector<RunRecord> run_one(const BanditModel& model, const AgentConfig& config, std::int64_t horizon,
                               std::uint64_t seed);

/// Steps at which curves are sampled: about `points` steps, every step while
/// geometric spacing would be finer than one, always ending at `horizon`.
std::vector<std::int64_t> curve_steps(std::int64_t horizon, std::int64_t points);

/// Unique rounded values of `count` geometrically spaced reals in [start, end].
std::vector<std::int64_t> log_spaced_integers(std::int64_t count, std::int64_t start, std::int64_t end);

struct CurvePoint {
    std::int64_t step = 0;
    double regret = 0.0;
    double budget = 0.0;
};

struct RunSummary {
    std::string agent;
    std::int64_t model = 0;
    std::int64_t seed = 0;
    double final_regret = 0.0;
    double final_realized_regret = 0.0;
    double final_budget = 0.0;
    double min_budget = 0.0;
    std::int64_t e1 = 0, e2 = 0, e3 = 0;
    std::int64_t baseline_pulls = 0;
    /// Maximal runs [first, last] of steps with negative budget.
    std::vector<std::pair<std::int64_t, std::int64_t>> violations;
    /// Checkpoints of the agent's schedule at which the budget was negative.
    std::int64_t checkpoint_violations = 0;
    std::vector<CurvePoint> curve;

    bool violated_any_step() const { return !violations.empty(); }
};

/// Folds a run into its summary while it executes.
class RunAccumulator {
public:
    RunAccumulator(std::string agent, std::int64_t model, std::int64_t seed, CheckpointSchedule checkpoints,
                   std::vector<std::int64_t> curve_steps, double best_mean);

    void add(const RunRecord& r);
    RunSummary finish() &&;

private:
    RunSummary s_;
    CheckpointSchedule checkpoints_;
    std::vector<std::int64_t> curve_steps_;
    std::size_t next_curve_ = 0;
    double best_mean_;
    std::optional<std::int64_t> open_violation_;
    std::int64_t last_step_ = 0;
};

RunSummary summarize(const std::vector<RunRecord>& records, const std::string& agent, std::int64_t model,
                     std::int64_t seed, const CheckpointSchedule& checkpoints, double best_mean,
                     std::int64_t curve_points);

struct ExperimentSummary {
    std::vector<std::string> agents;
    std::int64_t n_models = 0;
    std::int64_t n_seeds = 0;
    std::int64_t horizon = 0;
    /// Ordered by (model, seed, agent index).
    std::vector<RunSummary> runs;

    const RunSummary& run(std::int64_t model, std::int64_t seed, std::size_t agent) const;
    std::optional<std::size_t> agent_index(const std::string& label) const;
    /// Final regret of `agent` averaged over seeds of `model`.
    double mean_final_regret(std::size_t agent, std::int64_t model) const;
    /// Final regrets of `agent` over every (model, seed) pair.
    std::vector<double> final_regrets(std::size_t agent) const;
    /// Mean regret curve of `agent` over all runs (curves share their steps).
    std::vector<CurvePoint> mean_curve(std::size_t agent) const;
};

struct ReplicateOptions {
    std::uint64_t root_seed = 0;
    unsigned workers = 1;
    std::int64_t curve_points = 500;
};

using ModelFactory = std::function<BanditModel(std::int64_t model_index, std::uint64_t model_seed)>;

/// Seed handed to the factory for model `index`.
std::uint64_t model_seed(std::uint64_t root, std::int64_t index);
/// Reward-noise seed of run (model, seed); shared by all agents.
std::uint64_t run_seed(std::uint64_t root, std::int64_t model, std::int64_t seed);

ExperimentSummary replicate(const ModelFactory& factory, std::int64_t n_models, std::int64_t n_seeds,
                            const std::vector<AgentSpec>& agents, std::int64_t horizon,
                            const ReplicateOptions& options);

enum class SelectMode { worst, best };

struct ModelSelection {
    std::int64_t model = -1;
    /// 1 - R_a / R_b per model; nullopt where R_b = 0.
    std::vector<std::optional<double>> improvement;
    std::vector<std::string> warnings;
};

/// Model minimizing (worst) or maximizing (best) 1 - R_a/R_b of mean final regrets.
ModelSelection select_model(const std::vector<double>& regret_a, const std::vector<double>& regret_b,
                            SelectMode mode);
ModelSelection select_model(const ExperimentSummary& summary, const std::string& agent_a,
                            const std::string& agent_b, SelectMode mode);

struct SweepPoint {
    std::int64_t period = 1;
    double mean_delta = 0.0;  // mean of R_clucb2t(n) - R_linucb(n)
    double stderr_delta = 0.0;
};

/// Runs linucb and clucb2t for every period; `base` supplies alpha, delta and lambda.
std::vector<SweepPoint> checkpoint_sweep(const ModelFactory& factory, std::int64_t n_models, std::int64_t n_seeds,
                                         const std::vector<std::int64_t>& periods, const AgentSpec& base,
                                         std::int64_t horizon, const ReplicateOptions& options);

/// Fraction of steps in [first, last] whose event equals `event`.
double event_frequency(const std::vector<RunRecord>& records, std::int64_t first, std::int64_t last, Event event);

/// Default worker count: CBANDIT_WORKERS if set, else hardware concurrency.
unsigned default_workers();

}  // namespace cbandit
