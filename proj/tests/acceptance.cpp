// Scaled experiments and property checks, one PASS/FAIL line each.
// Exit status is nonzero when any check fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cbandit/artifacts.hpp"
#include "cbandit/config.hpp"
#include "cbandit/harness.hpp"
#include "cbandit/rng.hpp"
#include "support/ellipsoid_oracle.hpp"
#include "support/random_instances.hpp"

using namespace cbandit;
namespace fs = std::filesystem;

namespace {

unsigned workers() { return default_workers(); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = ranks(x), ry = ranks(y);
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

std::string fmt(double x, int prec = 4) {
    std::ostringstream s;
    s.precision(prec);
    s << x;
    return s.str();
}

const char* kBernoulli =
    "env: {kind: bernoulli, k: 10, mean_low: 0.25, mean_high: 0.75}\n"
    "alpha: 0.05\n"
    "delta: 0.01\n"
    "baseline_rank: 4\n"
    "n_models: 20\n"
    "n_seeds: 10\n"
    "root_seed: 2024\n"
    "output: {curve_points: 50}\n";

ExperimentSummary run_config(const ExperimentConfig& cfg) {
    ReplicateOptions o;
    o.root_seed = cfg.root_seed;
    o.workers = workers();
    o.curve_points = cfg.output.curve_points;
    return replicate(make_model_factory(cfg), cfg.n_models, cfg.n_seeds, resolve_agents(cfg), cfg.horizon, o);
}

struct Outcome {
    bool pass;
    std::string detail;
};

Outcome constraint_satisfaction() {
    const auto cfg = parse_config_text(std::string(kBernoulli) +
                                       "horizon: 20000\n"
                                       "agents: [clucb2, {variant: clucb2t, label: t500, checkpoints: {period: 500}},"
                                       " oracle]\n");
    const auto s = run_config(cfg);
    double ok[3] = {0, 0, 0};
    std::int64_t n = 0;
    for (std::int64_t m = 0; m < cfg.n_models; ++m)
        for (std::int64_t r = 0; r < cfg.n_seeds; ++r) {
            ok[0] += !s.run(m, r, 0).violated_any_step();
            ok[1] += s.run(m, r, 1).checkpoint_violations == 0;
            ok[2] += !s.run(m, r, 2).violated_any_step();
            ++n;
        }
    for (double& x : ok) x /= static_cast<double>(n);
    return {ok[0] >= 0.99 && ok[1] >= 0.99 && ok[2] == 1.0,
            "clucb2 all-step " + fmt(ok[0]) + ", clucb2t(500) checkpoints " + fmt(ok[1]) + ", oracle " + fmt(ok[2])};
}

Outcome ablation_ordering() {
    const auto cfg = parse_config_text(std::string(kBernoulli) +
                                       "horizon: 100000\n"
                                       "agents: [clucb2, clucb_m, clucb, clucb_s]\n");
    const auto s = run_config(cfg);
    const double r2 = median(s.final_regrets(0)), rm = median(s.final_regrets(1)), rc = median(s.final_regrets(2)),
                 rs = median(s.final_regrets(3));
    const double cut = 1.0 - r2 / rc;
    const bool pass = r2 < rm && rm < rc && rs < rc && cut >= 0.30;
    return {pass, "median regret clucb2 " + fmt(r2, 6) + ", clucb_m " + fmt(rm, 6) + ", clucb " + fmt(rc, 6) +
                      ", clucb_s " + fmt(rs, 6) + "; reduction vs clucb " + fmt(100 * cut, 3) + "%"};
}

Outcome linear_improvement() {
    const auto cfg = parse_config_text(
        "env: {kind: linear, k: 30, dim: 20, noise_sd: 0.1}\n"
        "horizon: 20000\nalpha: 0.05\ndelta: 0.01\nlambda: 0.5\nbaseline_rank: 6\n"
        "n_models: 10\nn_seeds: 5\nroot_seed: 77\nagents: [clucb2, clucb]\noutput: {curve_points: 20}\n");
    const auto s = run_config(cfg);
    const double r2 = median(s.final_regrets(0)), rc = median(s.final_regrets(1));
    return {r2 <= 0.8 * rc,
            "median regret clucb2 " + fmt(r2, 6) + ", clucb " + fmt(rc, 6) + ", ratio " + fmt(r2 / rc)};
}

Outcome checkpoint_trend() {
    const auto cfg =
        parse_config_text(std::string(kBernoulli) + "horizon: 20000\ncheckpoints: {sweep: {count: 15}}\n");
    ReplicateOptions o;
    o.root_seed = cfg.root_seed;
    o.workers = workers();
    o.curve_points = 10;
    const auto periods = sweep_periods(cfg);
    const auto pts =
        checkpoint_sweep(make_model_factory(cfg), cfg.n_models, cfg.n_seeds, periods, sweep_base(cfg), cfg.horizon, o);
    std::vector<double> t, d;
    for (const auto& p : pts) {
        t.push_back(static_cast<double>(p.period));
        d.push_back(p.mean_delta);
    }
    const double rho = spearman(t, d);
    const bool pass = rho <= -0.8 && pts.front().period == 1 && pts.back().period == cfg.horizon &&
                      d.front() > d.back();
    return {pass, std::to_string(pts.size()) + " periods, spearman " + fmt(rho) + ", delta(T=1) " + fmt(d.front(), 6) +
                      ", delta(T=n) " + fmt(d.back(), 6)};
}

Outcome t1_reduction() {
    int identical = 0;
    for (int i = 0; i < 50; ++i) {
        const auto m = i % 2 ? gen_linear_model(1000 + static_cast<std::uint64_t>(i), 30, 10, 0.1, 4)
                             : gen_bernoulli_model(1000 + static_cast<std::uint64_t>(i), 10, 0.25, 0.75, 4);
        AgentSpec a;
        a.variant = Variant::clucb2;
        AgentSpec b = a;
        b.variant = Variant::clucb2t;
        b.checkpoints = CheckpointSchedule::every(1);
        const auto seed = 5000 + static_cast<std::uint64_t>(i);
        const auto ra = run_one(m, make_agent_config(a, m), 3000, seed);
        const auto rb = run_one(m, make_agent_config(b, m), 3000, seed);
        bool same = ra.size() == rb.size();
        for (std::size_t j = 0; same && j < ra.size(); ++j)
            same = ra[j].arm == rb[j].arm && ra[j].reward == rb[j].reward && ra[j].event == rb[j].event;
        identical += same;
    }
    return {identical == 50, std::to_string(identical) + "/50 pairs bit-identical over 3000 steps"};
}

Outcome ellipsoid_closed_form() {
    std::mt19937_64 g(31337);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto ell = testutil::random_ellipsoid(g, 1 + i % 10);
        const Eigen::VectorXd x = testutil::gaussian(g, ell.dim());
        const oracle::Ellipsoid e{ell.center, ell.shape, ell.radius};
        worst = std::max(worst, std::abs(ellipsoid_linear_min(ell, x) - oracle::optimize(e, x, -1.0)));
        worst = std::max(worst, std::abs(ellipsoid_linear_max(ell, x) - oracle::optimize(e, x, 1.0)));
    }
    return {worst <= 1e-6, "max abs error " + fmt(worst, 3) + " over 1000 instances, d in [1, 10]"};
}

Outcome coverage() {
    const double delta = 0.01;
    // theta* inside the ellipsoid at every step of a clucb2 run (ellipsoid share delta/2)
    int covered = 0;
    for (int i = 0; i < 500; ++i) {
        const auto m = gen_linear_model(derive_rng(9, StreamKind::model, {static_cast<std::uint64_t>(i)})(), 30, 10,
                                        0.1, 6);
        AgentSpec s;
        s.variant = Variant::clucb2;
        s.delta = delta;
        Agent agent(make_agent_config(s, m));
        const auto info = baseline_info(m);
        Rng rng = derive_rng(9, StreamKind::rewards, {static_cast<std::uint64_t>(i)});
        bool inside = contains(agent.ellipsoid(), m.theta_star);
        for (int t = 0; inside && t < 2000; ++t) {
            agent.step(m.features, info.baseline_arm, info.mu_b, [&](Eigen::Index a) { return pull(m, a, rng); });
            inside = contains(agent.ellipsoid(), m.theta_star);
        }
        covered += inside;
    }
    // |sum of noise| within psi_L at every prefix length (martingale share delta/2)
    const int sequences = 10000, len = 2000;
    int held = 0;
    const double sigma = 0.5;
    std::vector<double> psi(len + 1);
    for (int n = 0; n <= len; ++n) psi[static_cast<std::size_t>(n)] = martingale_bound(sigma, n, delta / 2);
    for (int i = 0; i < sequences; ++i) {
        Rng rng = derive_rng(11, StreamKind::monte_carlo, {static_cast<std::uint64_t>(i)});
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const double mu = 0.25 + 0.5 * u(rng);
        double sum = 0.0;
        bool ok = true;
        for (int n = 1; ok && n <= len; ++n) {
            sum += (u(rng) < mu ? 1.0 : 0.0) - mu;
            ok = std::abs(sum) <= psi[static_cast<std::size_t>(n)];
        }
        held += ok;
    }
    const double c1 = covered / 500.0, c2 = held / static_cast<double>(sequences);
    return {c1 >= 1 - delta && c2 >= 1 - delta,
            "ellipsoid coverage " + fmt(c1) + " of 500 runs, martingale bound " + fmt(c2) + " of 10000 sequences"};
}

Outcome numerical_stability() {
    std::mt19937_64 g(8);
    const Eigen::Index d = 50;
    auto s = rls_init<double>(d, 0.5);
    Eigen::MatrixXd v = 0.5 * Eigen::MatrixXd::Identity(d, d);
    double worst = 0.0;
    for (int i = 1; i <= 10000; ++i) {
        const Eigen::VectorXd phi = testutil::unit_ball(g, d);
        rls_update(s, phi, 0.0);
        v += phi * phi.transpose();
        // just before and at the scheduled refresh
        if (i == 9999 || i == 10000) worst = std::max(worst, (s.v_inv - v.inverse()).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-8, "max abs error " + fmt(worst, 3) + " after 9999 and 10000 updates, d=50"};
}

Outcome e2_frequency() {
    const int models = 20;
    const std::int64_t n = 20000;
    double total = 0.0;
    for (int i = 0; i < models; ++i) {
        const auto m = gen_linear_model(model_seed(99, i), 30, 20, 0.1, 3);
        AgentSpec s;
        s.variant = Variant::clucb2;
        const auto rec = run_one(m, make_agent_config(s, m), n, run_seed(99, i, 0));
        total += event_frequency(rec, 1, n / 4, Event::e2_other_safe);
    }
    const double mean = total / models;
    return {mean >= 0.2 && mean <= 0.6, "mean E2 fraction " + fmt(mean) + " over 20 models, first 25% of steps"};
}

int cli(const std::string& args) {
    const int status = std::system((std::string(CBANDIT_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const auto dir = fs::temp_directory_path() / "cbandit_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream c(dir / "c.yaml");
        c << "env: {kind: linear, k: 20, dim: 8, noise_sd: 0.1}\nhorizon: 3000\nbaseline_rank: 4\n"
             "n_models: 4\nn_seeds: 4\nroot_seed: 5\n"
             "agents: [linucb, clucb, clucb2, {variant: clucb2t, label: t100, checkpoints: {period: 100}}]\n";
    }
    const std::string cfg = "'" + (dir / "c.yaml").string() + "'";
    int rc = 0;
    rc |= cli("run " + cfg + " --out '" + (dir / "a").string() + "' --workers 1");
    rc |= cli("run " + cfg + " --out '" + (dir / "b").string() + "' --workers 1");
    rc |= cli("run " + cfg + " --out '" + (dir / "c").string() + "' --workers 8");
    const auto a = slurp(dir / "a" / "curves.csv"), b = slurp(dir / "b" / "curves.csv"),
               c = slurp(dir / "c" / "curves.csv");
    const bool pass = rc == 0 && !a.empty() && a == b && a == c;
    fs::remove_all(dir);
    return {pass, std::string(rc ? "cli failed; " : "") + "curves.csv " + std::to_string(a.size()) +
                      " bytes, repeat " + (a == b ? "identical" : "differs") + ", workers 1 vs 8 " +
                      (a == c ? "identical" : "differs")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> checks{
        {"1 constraint satisfaction", constraint_satisfaction},
        {"2 ablation ordering", ablation_ordering},
        {"3 linear improvement", linear_improvement},
        {"4 checkpoint trend", checkpoint_trend},
        {"5 T=1 reduction", t1_reduction},
        {"6 ellipsoid closed form", ellipsoid_closed_form},
        {"7 coverage", coverage},
        {"8 numerical stability", numerical_stability},
        {"9 E2 frequency", e2_frequency},
        {"10 determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : checks) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o{false, ""};
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << name << "] " << o.detail << " (" << fmt(secs, 3) << " s)"
                  << std::endl;
        failed += !o.pass;
    }
    std::cout << (checks.size() - failed) << "/" << checks.size() << " criteria passed" << std::endl;
    return failed ? 1 : 0;
}
