#pragma once

// Optimistic and conservative arm-selection policies for linear bandits.
//
// Every policy keeps a ridge estimate over its own observations and an
// ellipsoid around it. Conservative policies must keep the cumulative mean
// reward above (1 - alpha) times what the baseline would have earned; they
// differ in how they lower-bound their past rewards (self-normalized
// ellipsoid bound vs. a scalar martingale bound) and in how they pick an arm
// once the optimistic arm is ruled out.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "cbandit/confidence.hpp"
#include "cbandit/rls.hpp"

namespace cbandit {

enum class Variant {
    linucb,    // unconstrained optimism
    clucb,     // optimistic arm if the ellipsoid-based condition holds, else baseline
    clucb_m,   // two-step rule with the martingale-based condition
    clucb_s,   // ellipsoid-based condition with constrained optimistic selection
    clucb_l,   // ellipsoid-based condition, fall back to the safe arm with the best lower bound
    clucb2,    // martingale-based condition with constrained optimistic selection
    clucb2t,   // clucb2 where the condition is only enforced at checkpoints
    oracle,    // two-step rule with the exact condition on true means
    baseline,  // always plays the baseline (diagnostic)
};

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view name);
/// Comma-separated list of accepted variant names.
std::string variant_names();

/// True for variants whose condition uses the martingale bound; these split
/// delta evenly between the ellipsoid and the martingale bound.
bool uses_martingale_bound(Variant v);
/// True for variants that keep the constraint (everything but linucb and baseline).
bool is_conservative(Variant v);

enum class Event { e1_ucb_safe = 1, e2_other_safe = 2, e3_baseline = 3 };

std::string_view to_string(Event e);

/// Times at which the conservative condition must hold: either every
/// multiple of `period`, or an explicit strictly increasing list.
struct CheckpointSchedule {
    std::int64_t period = 1;
    std::vector<std::int64_t> times;

    static CheckpointSchedule every(std::int64_t period);
    static CheckpointSchedule at(std::vector<std::int64_t> times);

    bool is_explicit() const { return !times.empty(); }
    /// Smallest checkpoint >= t, or nullopt when none remains.
    std::optional<std::int64_t> next_at_or_after(std::int64_t t) const;
    bool is_checkpoint(std::int64_t t) const;
    void validate() const;
};

struct AgentConfig {
    Variant variant = Variant::clucb2;
    double alpha = 0.05;
    double delta = 0.01;
    /// delta is ignored here; the agent sets the ellipsoid's share.
    BoundParams bound_params;
    CheckpointSchedule checkpoints;
    /// Lower bound on the baseline mean for the checkpoint slack.
    double mu_l = 0.0;
    /// True parameter; required by the oracle variant only.
    Eigen::VectorXd oracle_theta;
    std::int64_t refresh_interval = kDefaultRefreshInterval;

    void validate() const;
    double ellipsoid_delta() const;
    double martingale_delta() const;
};

/// Index sets and running sums of the interaction so far (steps 1..t).
struct HistoryLedger {
    std::int64_t t = 0;
    std::vector<std::int64_t> explore_steps;
    std::vector<std::int64_t> baseline_steps;
    double explore_reward_sum = 0.0;
    double explore_mean_sum = 0.0;  // filled only when true means are available
    double baseline_mean_sum = 0.0;
    double total_baseline_mean_sum = 0.0;
    Eigen::VectorXd explore_feature_sum;

    explicit HistoryLedger(Eigen::Index dim = 0) : explore_feature_sum(Eigen::VectorXd::Zero(dim)) {}

    std::int64_t n_explore() const { return static_cast<std::int64_t>(explore_steps.size()); }
};

struct AgentDecision {
    Eigen::Index arm = 0;
    Event event = Event::e3_baseline;
    std::vector<Eigen::Index> safe_set;
    Eigen::VectorXd ucb_values;
    Eigen::VectorXd lcb_values;
};

/// What the conservative condition is measured against at the current step.
struct ConservativeTarget {
    double alpha = 0.05;
    Eigen::Index baseline_arm = 0;
    double baseline_mean = 0.0;  // known mean of the baseline at this step
    std::int64_t slack_steps = 0;
    double mu_l = 0.0;

    /// (1 - alpha) * sum of baseline means through the current step.
    double required(const HistoryLedger& ledger) const {
        return (1.0 - alpha) * (ledger.total_baseline_mean_sum + baseline_mean);
    }
    double slack() const { return alpha * static_cast<double>(slack_steps) * mu_l; }
};

/// Per-arm optimistic and pessimistic values over the ellipsoid.
struct ArmBounds {
    Eigen::VectorXd ucb;
    Eigen::VectorXd lcb;
};

ArmBounds arm_bounds(const ConfidenceEllipsoidd& ell, const Eigen::MatrixXd& features);

/// Unconstrained optimistic choice; ties go to the lowest index.
AgentDecision ucb_select(const ConfidenceEllipsoidd& ell, const Eigen::MatrixXd& features);

/// Self-normalized form: baseline history plus the ellipsoid lower bound on
/// <theta, candidate + sum of past explored features> against the target.
bool clucb_condition(const HistoryLedger& ledger, const ConfidenceEllipsoidd& ell,
                     const Eigen::VectorXd& candidate_phi, const ConservativeTarget& target);

/// Martingale form, with the realized-reward lower bound and the arm's lower
/// bound both truncated at zero. Never contains the baseline.
std::vector<Eigen::Index> safe_set(const HistoryLedger& ledger, const Eigen::VectorXd& lcb,
                                   const ConservativeTarget& target, double sigma, double martingale_delta);

std::vector<Eigen::Index> safe_set(const HistoryLedger& ledger, const ConfidenceEllipsoidd& ell,
                                   const Eigen::MatrixXd& features, const ConservativeTarget& target,
                                   double sigma, double martingale_delta);

/// Arms passing clucb_condition (plus any checkpoint slack). Never contains the baseline.
std::vector<Eigen::Index> safe_set_self_normalized(const HistoryLedger& ledger, const ConfidenceEllipsoidd& ell,
                                                   const Eigen::MatrixXd& features,
                                                   const ConservativeTarget& target);

/// Best optimistic safe arm, or the baseline when its known mean is larger
/// or no arm is safe. E1 when the winner is also an unconstrained
/// optimistic argmax over all arms (the baseline at its ellipsoid value), E2 otherwise.
AgentDecision constrained_select(const Eigen::VectorXd& ucb, const std::vector<Eigen::Index>& safe,
                                 Eigen::Index baseline_arm, double baseline_mean);

class Agent {
public:
    Agent(AgentConfig config);

    /// Chooses the arm for the next step without changing state.
    AgentDecision decide(const Eigen::MatrixXd& features, Eigen::Index baseline_arm, double baseline_mean) const;

    /// Absorbs the reward of the decision taken at the current step.
    void observe(const Eigen::MatrixXd& features, const AgentDecision& decision, double reward,
                 Eigen::Index baseline_arm, double baseline_mean);

    /// decide, pull through `reward_of`, observe.
    AgentDecision step(const Eigen::MatrixXd& features, Eigen::Index baseline_arm, double baseline_mean,
                       const std::function<double(Eigen::Index)>& reward_of);

    const AgentConfig& config() const { return config_; }
    const HistoryLedger& ledger() const { return ledger_; }
    const RlsStated& rls() const { return rls_; }
    const ConfidenceEllipsoidd& ellipsoid() const { return ellipsoid_; }

private:
    ConservativeTarget target(Eigen::Index baseline_arm, double baseline_mean) const;
    bool updates_on_baseline() const;
    void rebuild_ellipsoid();

    AgentConfig config_;
    BoundParams ellipsoid_params_;
    RlsStated rls_;
    ConfidenceEllipsoidd ellipsoid_;
    HistoryLedger ledger_;
};

}  // namespace cbandit
