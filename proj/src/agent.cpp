#include "cbandit/agent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "cbandit/errors.hpp"

namespace cbandit {

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 9> kVariantNames{{
    {Variant::linucb, "linucb"},
    {Variant::clucb, "clucb"},
    {Variant::clucb_m, "clucb_m"},
    {Variant::clucb_s, "clucb_s"},
    {Variant::clucb_l, "clucb_l"},
    {Variant::clucb2, "clucb2"},
    {Variant::clucb2t, "clucb2t"},
    {Variant::oracle, "oracle"},
    {Variant::baseline, "baseline"},
}};

// Lowest index attaining the maximum of `score`, skipping `skip` (or none when -1).
Eigen::Index argmax_lowest(const Eigen::VectorXd& score, Eigen::Index skip = -1) {
    Eigen::Index best = -1;
    for (Eigen::Index a = 0; a < score.size(); ++a) {
        if (a == skip) continue;
        if (best < 0 || score(a) > score(best)) best = a;
    }
    return best;
}

// Optimistic scores with the baseline replaced by its known mean.
Eigen::Index conservative_ucb_arm(const Eigen::VectorXd& ucb, Eigen::Index baseline_arm, double baseline_mean) {
    Eigen::VectorXd score = ucb;
    score(baseline_arm) = baseline_mean;
    return argmax_lowest(score);
}

}  // namespace

std::string_view to_string(Variant v) {
    for (const auto& [variant, name] : kVariantNames)
        if (variant == v) return name;
    return "unknown";
}

std::optional<Variant> parse_variant(std::string_view name) {
    for (const auto& [variant, n] : kVariantNames)
        if (n == name) return variant;
    return std::nullopt;
}

std::string variant_names() {
    std::string out;
    for (const auto& [variant, name] : kVariantNames) {
        if (!out.empty()) out += ", ";
        out += name;
    }
    return out;
}

bool uses_martingale_bound(Variant v) {
    return v == Variant::clucb_m || v == Variant::clucb2 || v == Variant::clucb2t;
}

bool is_conservative(Variant v) { return v != Variant::linucb && v != Variant::baseline; }

std::string_view to_string(Event e) {
    switch (e) {
        case Event::e1_ucb_safe: return "E1";
        case Event::e2_other_safe: return "E2";
        case Event::e3_baseline: return "E3";
    }
    return "?";
}

CheckpointSchedule CheckpointSchedule::every(std::int64_t period) {
    CheckpointSchedule s;
    s.period = period;
    s.validate();
    return s;
}

CheckpointSchedule CheckpointSchedule::at(std::vector<std::int64_t> times) {
    CheckpointSchedule s;
    s.times = std::move(times);
    s.validate();
    return s;
}

void CheckpointSchedule::validate() const {
    if (is_explicit()) {
        if (times.front() < 1) throw ConfigError("checkpoints: times must be >= 1");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (times[i] <= times[i - 1]) throw ConfigError("checkpoints: schedule must be strictly increasing");
    } else if (period < 1) {
        throw ConfigError("checkpoints: period must be >= 1");
    }
}

std::optional<std::int64_t> CheckpointSchedule::next_at_or_after(std::int64_t t) const {
    if (!is_explicit()) return ((t + period - 1) / period) * period;
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return std::nullopt;
    return *it;
}

bool CheckpointSchedule::is_checkpoint(std::int64_t t) const {
    if (!is_explicit()) return t % period == 0;
    return std::binary_search(times.begin(), times.end(), t);
}

void AgentConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("agent: alpha must lie in (0,1]");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("agent: delta must lie in (0,1)");
    BoundParams p = bound_params;
    p.delta = delta;
    cbandit::validate(p);
    checkpoints.validate();
    if (!(mu_l >= 0.0)) throw ConfigError("agent: mu_l must be >= 0");
    if (variant == Variant::oracle && oracle_theta.size() != bound_params.dim)
        throw ConfigError("agent: oracle variant requires the true parameter");
}

double AgentConfig::ellipsoid_delta() const { return uses_martingale_bound(variant) ? delta / 2.0 : delta; }

double AgentConfig::martingale_delta() const { return delta / 2.0; }

ArmBounds arm_bounds(const ConfidenceEllipsoidd& ell, const Eigen::MatrixXd& features) {
    if (features.cols() != ell.dim()) throw DimensionError("arm_bounds: feature dimension mismatch");
    const Eigen::MatrixXd projected = features * ell.shape_inv;
    const Eigen::VectorXd widths =
        projected.cwiseProduct(features).rowwise().sum().cwiseMax(0.0).cwiseSqrt() * ell.radius;
    const Eigen::VectorXd centers = features * ell.center;
    return {centers + widths, centers - widths};
}

AgentDecision ucb_select(const ConfidenceEllipsoidd& ell, const Eigen::MatrixXd& features) {
    if (features.rows() == 0) throw ConfigError("ucb_select: empty arm set");
    ArmBounds b = arm_bounds(ell, features);
    AgentDecision d;
    d.arm = argmax_lowest(b.ucb);
    d.event = Event::e1_ucb_safe;
    d.ucb_values = std::move(b.ucb);
    d.lcb_values = std::move(b.lcb);
    return d;
}

bool clucb_condition(const HistoryLedger& ledger, const ConfidenceEllipsoidd& ell,
                     const Eigen::VectorXd& candidate_phi, const ConservativeTarget& target) {
    if (ledger.explore_feature_sum.size() != candidate_phi.size())
        throw DimensionError("clucb_condition: feature dimension mismatch");
    const Eigen::VectorXd total = candidate_phi + ledger.explore_feature_sum;
    const double lhs = ledger.baseline_mean_sum + ellipsoid_linear_min(ell, total) + target.slack();
    return lhs >= target.required(ledger);
}

std::vector<Eigen::Index> safe_set(const HistoryLedger& ledger, const Eigen::VectorXd& lcb,
                                   const ConservativeTarget& target, double sigma, double martingale_delta) {
    const double history =
        std::max(ledger.explore_reward_sum - martingale_bound(sigma, ledger.n_explore(), martingale_delta), 0.0) +
        ledger.baseline_mean_sum + target.slack();
    const double required = target.required(ledger);
    std::vector<Eigen::Index> safe;
    for (Eigen::Index a = 0; a < lcb.size(); ++a) {
        if (a == target.baseline_arm) continue;
        if (history + std::max(lcb(a), 0.0) >= required) safe.push_back(a);
    }
    return safe;
}

std::vector<Eigen::Index> safe_set(const HistoryLedger& ledger, const ConfidenceEllipsoidd& ell,
                                   const Eigen::MatrixXd& features, const ConservativeTarget& target,
                                   double sigma, double martingale_delta) {
    return safe_set(ledger, arm_bounds(ell, features).lcb, target, sigma, martingale_delta);
}

std::vector<Eigen::Index> safe_set_self_normalized(const HistoryLedger& ledger, const ConfidenceEllipsoidd& ell,
                                                   const Eigen::MatrixXd& features,
                                                   const ConservativeTarget& target) {
    if (features.cols() != ell.dim() || ledger.explore_feature_sum.size() != ell.dim())
        throw DimensionError("safe_set_self_normalized: feature dimension mismatch");
    // ||phi_a + s||^2 in the V^{-1} metric, expanded so that V^{-1} s is formed once.
    const Eigen::VectorXd& s = ledger.explore_feature_sum;
    const Eigen::VectorXd vs = ell.shape_inv * s;
    const double ss = s.dot(vs);
    const Eigen::VectorXd cross = features * vs;
    const Eigen::VectorXd self = (features * ell.shape_inv).cwiseProduct(features).rowwise().sum();
    const Eigen::VectorXd centers = features * ell.center;
    const double center_s = ell.center.dot(s);

    const double history = ledger.baseline_mean_sum + target.slack();
    const double required = target.required(ledger);
    std::vector<Eigen::Index> safe;
    for (Eigen::Index a = 0; a < features.rows(); ++a) {
        if (a == target.baseline_arm) continue;
        const double norm = std::sqrt(std::max(self(a) + 2.0 * cross(a) + ss, 0.0));
        const double lower = centers(a) + center_s - ell.radius * norm;
        if (history + lower >= required) safe.push_back(a);
    }
    return safe;
}

AgentDecision constrained_select(const Eigen::VectorXd& ucb, const std::vector<Eigen::Index>& safe,
                                 Eigen::Index baseline_arm, double baseline_mean) {
    AgentDecision d;
    d.safe_set = safe;
    Eigen::Index best = -1;
    for (Eigen::Index a : safe)
        if (best < 0 || ucb(a) > ucb(best) || (ucb(a) == ucb(best) && a < best)) best = a;

    const bool play_baseline =
        best < 0 || baseline_mean > ucb(best) || (baseline_mean == ucb(best) && baseline_arm < best);
    if (play_baseline) {
        d.arm = baseline_arm;
        d.event = Event::e3_baseline;
        return d;
    }
    d.arm = best;
    // E1 only when no arm, the baseline included, looks better under the ellipsoid.
    d.event = ucb(best) >= ucb.maxCoeff() ? Event::e1_ucb_safe : Event::e2_other_safe;
    return d;
}

Agent::Agent(AgentConfig config) : config_(std::move(config)) {
    config_.validate();
    ellipsoid_params_ = config_.bound_params;
    ellipsoid_params_.delta = config_.ellipsoid_delta();
    rls_ = rls_init(config_.bound_params.dim, config_.bound_params.lambda, config_.refresh_interval);
    ledger_ = HistoryLedger(config_.bound_params.dim);
    rebuild_ellipsoid();
}

bool Agent::updates_on_baseline() const {
    return config_.variant == Variant::linucb || config_.variant == Variant::oracle;
}

void Agent::rebuild_ellipsoid() { ellipsoid_ = make_ellipsoid(rls_, beta(ellipsoid_params_, rls_.count)); }

ConservativeTarget Agent::target(Eigen::Index baseline_arm, double baseline_mean) const {
    ConservativeTarget tg;
    tg.alpha = config_.alpha;
    tg.baseline_arm = baseline_arm;
    tg.baseline_mean = baseline_mean;
    tg.mu_l = config_.mu_l;
    return tg;
}

AgentDecision Agent::decide(const Eigen::MatrixXd& features, Eigen::Index baseline_arm,
                            double baseline_mean) const {
    if (features.rows() == 0) throw ConfigError("decide: empty arm set");
    if (features.cols() != rls_.dim) throw DimensionError("decide: feature dimension mismatch");
    if (baseline_arm < 0 || baseline_arm >= features.rows()) throw ConfigError("decide: invalid baseline arm");

    const std::int64_t t = ledger_.t + 1;
    ArmBounds bounds = arm_bounds(ellipsoid_, features);
    ConservativeTarget tg = target(baseline_arm, baseline_mean);
    AgentDecision d;

    auto two_step = [&](bool safe) {
        AgentDecision out;
        const Eigen::Index a = conservative_ucb_arm(bounds.ucb, baseline_arm, baseline_mean);
        if (a != baseline_arm && safe) {
            out.arm = a;
            out.event = Event::e1_ucb_safe;
            out.safe_set = {a};
        } else {
            out.arm = baseline_arm;
            out.event = Event::e3_baseline;
        }
        return out;
    };
    const Eigen::Index ucb_arm = conservative_ucb_arm(bounds.ucb, baseline_arm, baseline_mean);

    switch (config_.variant) {
        case Variant::linucb: {
            d.arm = argmax_lowest(bounds.ucb);
            d.event = d.arm == baseline_arm ? Event::e3_baseline : Event::e1_ucb_safe;
            break;
        }
        case Variant::baseline: {
            d.arm = baseline_arm;
            d.event = Event::e3_baseline;
            break;
        }
        case Variant::oracle: {
            const Eigen::Index a = argmax_lowest(bounds.ucb);
            const double mu_a = features.row(a).dot(config_.oracle_theta);
            const double earned = ledger_.explore_mean_sum + ledger_.baseline_mean_sum;
            const bool ok = earned + mu_a >= tg.required(ledger_);
            if (a != baseline_arm && ok) {
                d.arm = a;
                d.event = Event::e1_ucb_safe;
                d.safe_set = {a};
            } else {
                d.arm = baseline_arm;
                d.event = Event::e3_baseline;
            }
            break;
        }
        case Variant::clucb: {
            const bool ok = ucb_arm != baseline_arm &&
                            clucb_condition(ledger_, ellipsoid_, features.row(ucb_arm).transpose(), tg);
            d = two_step(ok);
            break;
        }
        case Variant::clucb_m: {
            bool ok = false;
            if (ucb_arm != baseline_arm) {
                const auto safe = safe_set(ledger_, bounds.lcb, tg, config_.bound_params.sigma,
                                           config_.martingale_delta());
                ok = std::find(safe.begin(), safe.end(), ucb_arm) != safe.end();
            }
            d = two_step(ok);
            break;
        }
        case Variant::clucb_s: {
            d = constrained_select(bounds.ucb, safe_set_self_normalized(ledger_, ellipsoid_, features, tg),
                                   baseline_arm, baseline_mean);
            break;
        }
        case Variant::clucb_l: {
            const auto safe = safe_set_self_normalized(ledger_, ellipsoid_, features, tg);
            if (std::find(safe.begin(), safe.end(), ucb_arm) != safe.end()) {
                d.arm = ucb_arm;
                d.event = Event::e1_ucb_safe;
            } else {
                Eigen::Index best = -1;
                for (Eigen::Index a : safe)
                    if (best < 0 || bounds.lcb(a) > bounds.lcb(best)) best = a;
                if (best >= 0 && bounds.lcb(best) >= baseline_mean) {
                    d.arm = best;
                    d.event = bounds.ucb(best) >= bounds.ucb.maxCoeff() ? Event::e1_ucb_safe : Event::e2_other_safe;
                } else {
                    d.arm = baseline_arm;
                    d.event = Event::e3_baseline;
                }
            }
            d.safe_set = safe;
            break;
        }
        case Variant::clucb2: {
            d = constrained_select(
                bounds.ucb,
                safe_set(ledger_, bounds.lcb, tg, config_.bound_params.sigma, config_.martingale_delta()),
                baseline_arm, baseline_mean);
            break;
        }
        case Variant::clucb2t: {
            const auto next = config_.checkpoints.next_at_or_after(t);
            std::vector<Eigen::Index> safe;
            if (next) {
                tg.slack_steps = *next - t;
                safe = safe_set(ledger_, bounds.lcb, tg, config_.bound_params.sigma, config_.martingale_delta());
            } else {
                // No checkpoint left to protect.
                for (Eigen::Index a = 0; a < features.rows(); ++a)
                    if (a != baseline_arm) safe.push_back(a);
            }
            d = constrained_select(bounds.ucb, safe, baseline_arm, baseline_mean);
            break;
        }
    }
    d.ucb_values = std::move(bounds.ucb);
    d.lcb_values = std::move(bounds.lcb);
    return d;
}

void Agent::observe(const Eigen::MatrixXd& features, const AgentDecision& decision, double reward,
                    Eigen::Index baseline_arm, double baseline_mean) {
    if (decision.arm < 0 || decision.arm >= features.rows()) throw ConfigError("observe: invalid arm");
    const std::int64_t t = ++ledger_.t;
    ledger_.total_baseline_mean_sum += baseline_mean;
    const auto phi = features.row(decision.arm).transpose();
    bool update = false;
    if (decision.arm == baseline_arm) {
        ledger_.baseline_steps.push_back(t);
        ledger_.baseline_mean_sum += baseline_mean;
        update = updates_on_baseline();
    } else {
        ledger_.explore_steps.push_back(t);
        ledger_.explore_reward_sum += reward;
        ledger_.explore_feature_sum += phi;
        if (config_.oracle_theta.size() == phi.size()) ledger_.explore_mean_sum += phi.dot(config_.oracle_theta);
        update = true;
    }
    if (update) {
        rls_update(rls_, phi, reward);
        rebuild_ellipsoid();
    }
}

AgentDecision Agent::step(const Eigen::MatrixXd& features, Eigen::Index baseline_arm, double baseline_mean,
                          const std::function<double(Eigen::Index)>& reward_of) {
    AgentDecision d = decide(features, baseline_arm, baseline_mean);
    const double r = reward_of(d.arm);
    observe(features, d, r, baseline_arm, baseline_mean);
    return d;
}

}  // namespace cbandit
