#include "cbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "cbandit/errors.hpp"
#include "cbandit/rng.hpp"

namespace cbandit {

AgentConfig make_agent_config(const AgentSpec& spec, const BanditModel& model) {
    const BaselineInfo info = baseline_info(model);
    AgentConfig cfg;
    cfg.variant = spec.variant;
    cfg.alpha = spec.alpha;
    cfg.delta = spec.delta;
    cfg.bound_params.sigma = model.sigma;
    cfg.bound_params.b_norm = model.b_norm;
    cfg.bound_params.d_norm = model.d_norm;
    cfg.bound_params.lambda = spec.lambda;
    cfg.bound_params.delta = spec.delta;
    cfg.bound_params.dim = model.dim();
    cfg.checkpoints = spec.checkpoints;
    cfg.mu_l = info.mu_l;
    if (spec.variant == Variant::oracle) cfg.oracle_theta = model.theta_star;
    return cfg;
}

void simulate(const BanditModel& model, const AgentConfig& config, std::int64_t horizon, std::uint64_t seed,
              const std::function<void(const RunRecord&, const AgentDecision&)>& sink) {
    if (horizon < 1) throw ConfigError("simulate: horizon must be >= 1");
    Agent agent(config);
    const BaselineInfo info = baseline_info(model);
    const double best = model.means.maxCoeff();
    const double keep = 1.0 - config.alpha;
    Rng rng = derive_rng(seed, StreamKind::rewards, {});

    double earned = 0.0, earned_realized = 0.0, baseline_total = 0.0;
    for (std::int64_t t = 1; t <= horizon; ++t) {
        const AgentDecision d = agent.decide(model.features, info.baseline_arm, info.mu_b);
        const double reward = pull(model, d.arm, rng);
        agent.observe(model.features, d, reward, info.baseline_arm, info.mu_b);

        const double mu = model.means(d.arm);
        earned += mu;
        earned_realized += reward;
        baseline_total += info.mu_b;

        RunRecord rec;
        rec.step = t;
        rec.arm = d.arm;
        rec.reward = reward;
        rec.regret_increment = best - mu;
        rec.budget = earned - keep * baseline_total;
        rec.realized_budget = earned_realized - keep * baseline_total;
        rec.event = d.event;
        sink(rec, d);
    }
}

std::vector<RunRecord> run_one(const BanditModel& model, const AgentConfig& config, std::int64_t horizon,
                               std::uint64_t seed) {
    std::vector<RunRecord> out;
    out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(horizon, 0)));
    simulate(model, config, horizon, seed, [&](const RunRecord& r, const AgentDecision&) { out.push_back(r); });
    return out;
}

std::vector<std::int64_t> curve_steps(std::int64_t horizon, std::int64_t points) {
    if (horizon < 1) throw ConfigError("curve_steps: horizon must be >= 1");
    if (points < 2) throw ConfigError("curve_steps: need at least 2 points");
    std::vector<std::int64_t> steps;
    if (points >= horizon) {
        steps.resize(static_cast<std::size_t>(horizon));
        std::iota(steps.begin(), steps.end(), std::int64_t{1});
        return steps;
    }
    steps.reserve(static_cast<std::size_t>(points));
    steps.push_back(1);
    const double log_h = std::log(static_cast<double>(horizon));
    for (std::int64_t i = 1; i < points; ++i) {
        const double g = std::exp(log_h * static_cast<double>(i) / static_cast<double>(points - 1));
        std::int64_t s = std::max(steps.back() + 1, static_cast<std::int64_t>(std::llround(g)));
        s = std::min(s, horizon - (points - 1 - i));
        steps.push_back(s);
    }
    steps.back() = horizon;
    return steps;
}

std::vector<std::int64_t> log_spaced_integers(std::int64_t count, std::int64_t start, std::int64_t end) {
    if (count < 1) throw ConfigError("log spacing: count must be >= 1");
    if (start < 1 || end < start) throw ConfigError("log spacing: need 1 <= start <= end");
    std::vector<std::int64_t> out;
    if (count == 1) return {start};
    const double lo = std::log(static_cast<double>(start));
    const double hi = std::log(static_cast<double>(end));
    for (std::int64_t i = 0; i < count; ++i) {
        const double x = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
        const auto v = std::clamp(static_cast<std::int64_t>(std::llround(x)), start, end);
        if (out.empty() || v > out.back()) out.push_back(v);
    }
    return out;
}

RunAccumulator::RunAccumulator(std::string agent, std::int64_t model, std::int64_t seed,
                               CheckpointSchedule checkpoints, std::vector<std::int64_t> curve_steps,
                               double best_mean)
    : checkpoints_(std::move(checkpoints)), curve_steps_(std::move(curve_steps)), best_mean_(best_mean) {
    s_.agent = std::move(agent);
    s_.model = model;
    s_.seed = seed;
    s_.min_budget = std::numeric_limits<double>::infinity();
    s_.curve.reserve(curve_steps_.size());
}

void RunAccumulator::add(const RunRecord& r) {
    last_step_ = r.step;
    s_.final_regret += r.regret_increment;
    s_.final_realized_regret += best_mean_ - r.reward;
    s_.final_budget = r.budget;
    s_.min_budget = std::min(s_.min_budget, r.budget);
    switch (r.event) {
        case Event::e1_ucb_safe: ++s_.e1; break;
        case Event::e2_other_safe: ++s_.e2; break;
        case Event::e3_baseline: ++s_.e3; break;
    }
    if (r.event == Event::e3_baseline) ++s_.baseline_pulls;

    const bool negative = r.budget < -kBudgetTolerance;
    if (negative && !open_violation_) open_violation_ = r.step;
    if (!negative && open_violation_) {
        s_.violations.emplace_back(*open_violation_, r.step - 1);
        open_violation_.reset();
    }
    if (negative && checkpoints_.is_checkpoint(r.step)) ++s_.checkpoint_violations;

    if (next_curve_ < curve_steps_.size() && curve_steps_[next_curve_] == r.step) {
        s_.curve.push_back({r.step, s_.final_regret, r.budget});
        ++next_curve_;
    }
}

RunSummary RunAccumulator::finish() && {
    if (open_violation_) s_.violations.emplace_back(*open_violation_, last_step_);
    open_violation_.reset();
    return std::move(s_);
}

RunSummary summarize(const std::vector<RunRecord>& records, const std::string& agent, std::int64_t model,
                     std::int64_t seed, const CheckpointSchedule& checkpoints, double best_mean,
                     std::int64_t curve_points) {
    const auto horizon = static_cast<std::int64_t>(records.size());
    RunAccumulator acc(agent, model, seed, checkpoints, curve_steps(horizon, curve_points), best_mean);
    for (const auto& r : records) acc.add(r);
    return std::move(acc).finish();
}

const RunSummary& ExperimentSummary::run(std::int64_t model, std::int64_t seed, std::size_t agent) const {
    const auto idx = (static_cast<std::size_t>(model) * static_cast<std::size_t>(n_seeds) +
                      static_cast<std::size_t>(seed)) *
                         agents.size() +
                     agent;
    return runs.at(idx);
}

std::optional<std::size_t> ExperimentSummary::agent_index(const std::string& label) const {
    for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i] == label) return i;
    return std::nullopt;
}

double ExperimentSummary::mean_final_regret(std::size_t agent, std::int64_t model) const {
    double sum = 0.0;
    for (std::int64_t s = 0; s < n_seeds; ++s) sum += run(model, s, agent).final_regret;
    return sum / static_cast<double>(n_seeds);
}

std::vector<double> ExperimentSummary::final_regrets(std::size_t agent) const {
    std::vector<double> out;
    for (std::int64_t m = 0; m < n_models; ++m)
        for (std::int64_t s = 0; s < n_seeds; ++s) out.push_back(run(m, s, agent).final_regret);
    return out;
}

std::vector<CurvePoint> ExperimentSummary::mean_curve(std::size_t agent) const {
    std::vector<CurvePoint> mean;
    std::int64_t count = 0;
    for (std::int64_t m = 0; m < n_models; ++m) {
        for (std::int64_t s = 0; s < n_seeds; ++s) {
            const auto& c = run(m, s, agent).curve;
            if (mean.empty()) {
                mean.resize(c.size());
                for (std::size_t i = 0; i < c.size(); ++i) mean[i].step = c[i].step;
            }
            for (std::size_t i = 0; i < c.size(); ++i) {
                mean[i].regret += c[i].regret;
                mean[i].budget += c[i].budget;
            }
            ++count;
        }
    }
    for (auto& p : mean) {
        p.regret /= static_cast<double>(count);
        p.budget /= static_cast<double>(count);
    }
    return mean;
}

std::uint64_t model_seed(std::uint64_t root, std::int64_t index) {
    Rng rng = derive_rng(root, StreamKind::model, {static_cast<std::uint64_t>(index)});
    return rng();
}

std::uint64_t run_seed(std::uint64_t root, std::int64_t model, std::int64_t seed) {
    Rng rng = derive_rng(root, StreamKind::rewards,
                         {static_cast<std::uint64_t>(model), static_cast<std::uint64_t>(seed)});
    return rng();
}

ExperimentSummary replicate(const ModelFactory& factory, std::int64_t n_models, std::int64_t n_seeds,
                            const std::vector<AgentSpec>& agents, std::int64_t horizon,
                            const ReplicateOptions& options) {
    if (n_models < 1 || n_seeds < 1) throw ConfigError("replicate: n_models and n_seeds must be >= 1");
    if (agents.empty()) throw ConfigError("replicate: no agents");
    if (horizon < 1) throw ConfigError("replicate: horizon must be >= 1");

    std::vector<BanditModel> models;
    models.reserve(static_cast<std::size_t>(n_models));
    for (std::int64_t m = 0; m < n_models; ++m) models.push_back(factory(m, model_seed(options.root_seed, m)));

    ExperimentSummary summary;
    summary.n_models = n_models;
    summary.n_seeds = n_seeds;
    summary.horizon = horizon;
    for (const auto& a : agents) summary.agents.push_back(a.label);

    const std::vector<std::int64_t> steps = curve_steps(horizon, options.curve_points);
    const std::size_t n_agents = agents.size();
    const std::size_t total = static_cast<std::size_t>(n_models * n_seeds) * n_agents;
    summary.runs.resize(total);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&]() {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= total) return;
            try {
                const std::size_t agent = job % n_agents;
                const auto pair = static_cast<std::int64_t>(job / n_agents);
                const std::int64_t m = pair / n_seeds;
                const std::int64_t s = pair % n_seeds;
                const BanditModel& model = models[static_cast<std::size_t>(m)];
                const AgentConfig cfg = make_agent_config(agents[agent], model);
                RunAccumulator acc(agents[agent].label, m, s, cfg.checkpoints, steps, model.means.maxCoeff());
                simulate(model, cfg, horizon, run_seed(options.root_seed, m, s),
                         [&](const RunRecord& r, const AgentDecision&) { acc.add(r); });
                summary.runs[job] = std::move(acc).finish();
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(total);
                return;
            }
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(options.workers, static_cast<unsigned>(total)));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return summary;
}

ModelSelection select_model(const std::vector<double>& regret_a, const std::vector<double>& regret_b,
                            SelectMode mode) {
    if (regret_a.size() != regret_b.size()) throw DimensionError("select_model: regret lists differ in length");
    ModelSelection sel;
    sel.improvement.resize(regret_a.size());
    for (std::size_t m = 0; m < regret_a.size(); ++m) {
        if (regret_b[m] == 0.0) {
            sel.warnings.push_back("model " + std::to_string(m) + " excluded: reference regret is zero");
            continue;
        }
        const double ratio = 1.0 - regret_a[m] / regret_b[m];
        sel.improvement[m] = ratio;
        if (sel.model < 0) {
            sel.model = static_cast<std::int64_t>(m);
            continue;
        }
        const double cur = *sel.improvement[static_cast<std::size_t>(sel.model)];
        if ((mode == SelectMode::worst && ratio < cur) || (mode == SelectMode::best && ratio > cur))
            sel.model = static_cast<std::int64_t>(m);
    }
    if (sel.model < 0) throw std::runtime_error("select_model: every model has zero reference regret");
    return sel;
}

ModelSelection select_model(const ExperimentSummary& summary, const std::string& agent_a,
                            const std::string& agent_b, SelectMode mode) {
    const auto ia = summary.agent_index(agent_a);
    const auto ib = summary.agent_index(agent_b);
    if (!ia) throw ConfigError("select_model: agent '" + agent_a + "' not in summary");
    if (!ib) throw ConfigError("select_model: agent '" + agent_b + "' not in summary");
    std::vector<double> ra, rb;
    for (std::int64_t m = 0; m < summary.n_models; ++m) {
        ra.push_back(summary.mean_final_regret(*ia, m));
        rb.push_back(summary.mean_final_regret(*ib, m));
    }
    return select_model(ra, rb, mode);
}

std::vector<SweepPoint> checkpoint_sweep(const ModelFactory& factory, std::int64_t n_models, std::int64_t n_seeds,
                                         const std::vector<std::int64_t>& periods, const AgentSpec& base,
                                         std::int64_t horizon, const ReplicateOptions& options) {
    if (periods.empty()) throw ConfigError("checkpoint_sweep: no periods");
    for (std::size_t i = 0; i < periods.size(); ++i) {
        if (periods[i] < 1 || periods[i] > horizon)
            throw ConfigError("checkpoint_sweep: periods must lie in [1, horizon]");
        if (i > 0 && periods[i] <= periods[i - 1])
            throw ConfigError("checkpoint_sweep: periods must be strictly increasing");
    }
    std::vector<AgentSpec> specs;
    AgentSpec ucb = base;
    ucb.label = "linucb";
    ucb.variant = Variant::linucb;
    ucb.checkpoints = CheckpointSchedule{};
    specs.push_back(ucb);
    for (std::int64_t p : periods) {
        AgentSpec s = base;
        s.label = "clucb2t_T" + std::to_string(p);
        s.variant = Variant::clucb2t;
        s.checkpoints = CheckpointSchedule::every(p);
        specs.push_back(s);
    }
    const ExperimentSummary summary = replicate(factory, n_models, n_seeds, specs, horizon, options);

    std::vector<SweepPoint> out;
    const double n = static_cast<double>(n_models * n_seeds);
    for (std::size_t i = 0; i < periods.size(); ++i) {
        std::vector<double> deltas;
        for (std::int64_t m = 0; m < n_models; ++m)
            for (std::int64_t s = 0; s < n_seeds; ++s)
                deltas.push_back(summary.run(m, s, i + 1).final_regret - summary.run(m, s, 0).final_regret);
        const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
        double var = 0.0;
        for (double d : deltas) var += (d - mean) * (d - mean);
        const double se = deltas.size() > 1 ? std::sqrt(var / (n - 1.0) / n) : 0.0;
        out.push_back({periods[i], mean, se});
    }
    return out;
}

double event_frequency(const std::vector<RunRecord>& records, std::int64_t first, std::int64_t last, Event event) {
    if (first < 1 || last < first) throw ConfigError("event_frequency: empty window");
    if (last > static_cast<std::int64_t>(records.size()))
        throw ConfigError("event_frequency: window extends past the horizon");
    std::int64_t hits = 0;
    for (std::int64_t t = first; t <= last; ++t)
        if (records[static_cast<std::size_t>(t - 1)].event == event) ++hits;
    return static_cast<double>(hits) / static_cast<double>(last - first + 1);
}

unsigned default_workers() {
    if (const char* env = std::getenv("CBANDIT_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace cbandit
