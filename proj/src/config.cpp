#include "cbandit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "cbandit/errors.hpp"

namespace cbandit {

namespace {

using LineMap = std::map<std::string, int>;

std::string located(const std::string& path, int line, const std::string& msg) {
    std::ostringstream os;
    os << path;
    if (line > 0) os << " (line " << line << ")";
    os << ": " << msg;
    return os.str();
}

int line_of(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    return m.line >= 0 ? m.line + 1 : 0;
}

[[noreturn]] void fail(const std::string& path, const YAML::Node& n, const std::string& msg) {
    throw ConfigError(located(path, line_of(n), msg));
}

// Reads one mapping and complains about any key nobody asked for.
class MapReader {
public:
    MapReader(const YAML::Node& node, std::string path, LineMap& lines)
        : node_(node), path_(std::move(path)), lines_(lines) {
        if (!node_.IsMap()) fail(path_.empty() ? "<root>" : path_, node_, "expected a mapping");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    std::optional<YAML::Node> take(const std::string& key) {
        used_.insert(key);
        YAML::Node child = node_[key];
        if (!child.IsDefined()) return std::nullopt;
        lines_[field(key)] = line_of(child);
        return child;
    }

    bool has(const std::string& key) const { return node_[key].IsDefined(); }

    void finish() const {
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!used_.count(key)) fail(field(key), kv.first, "unknown key");
        }
    }

    const YAML::Node& node() const { return node_; }
    const std::string& path() const { return path_; }

private:
    YAML::Node node_;
    std::string path_;
    LineMap& lines_;
    std::set<std::string> used_;
};

template <class T>
T scalar(const YAML::Node& n, const std::string& path, const char* what) {
    if (!n.IsScalar()) fail(path, n, std::string("expected ") + what);
    if constexpr (std::is_unsigned_v<T>) {
        if (!n.Scalar().empty() && n.Scalar()[0] == '-') fail(path, n, std::string("expected ") + what);
    }
    try {
        return n.as<T>();
    } catch (const YAML::BadConversion&) {
        fail(path, n, std::string("expected ") + what);
    }
}

template <class T>
void read(MapReader& r, const std::string& key, T& out, const char* what) {
    if (auto n = r.take(key)) out = scalar<T>(*n, r.field(key), what);
}

template <class T>
void read(MapReader& r, const std::string& key, std::optional<T>& out, const char* what) {
    if (auto n = r.take(key)) out = scalar<T>(*n, r.field(key), what);
}

ModelKind parse_kind(const YAML::Node& n, const std::string& path) {
    const auto s = scalar<std::string>(n, path, "a string");
    if (s == "bernoulli") return ModelKind::bernoulli_mab;
    if (s == "linear") return ModelKind::linear;
    if (s == "dataset") return ModelKind::dataset;
    fail(path, n, "unknown env kind '" + s + "'; valid kinds: bernoulli, linear, dataset");
}

EnvConfig parse_env(const YAML::Node& node, LineMap& lines) {
    MapReader r(node, "env", lines);
    EnvConfig env;
    auto kind = r.take("kind");
    if (!kind) fail("env.kind", node, "missing required key");
    env.kind = parse_kind(*kind, "env.kind");
    switch (env.kind) {
        case ModelKind::bernoulli_mab:
            read(r, "k", env.k, "an integer");
            read(r, "mean_low", env.mean_low, "a number");
            read(r, "mean_high", env.mean_high, "a number");
            break;
        case ModelKind::linear:
            read(r, "k", env.k, "an integer");
            read(r, "dim", env.dim, "an integer");
            read(r, "noise_sd", env.noise_sd, "a number");
            break;
        case ModelKind::dataset:
            read(r, "path", env.path, "a string");
            read(r, "noise_sd", env.noise_sd, "a number");
            break;
    }
    r.finish();
    return env;
}

std::vector<std::int64_t> int_list(const YAML::Node& n, const std::string& path) {
    if (!n.IsSequence()) fail(path, n, "expected a list of integers");
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < n.size(); ++i)
        out.push_back(scalar<std::int64_t>(n[i], path + "[" + std::to_string(i) + "]", "an integer"));
    return out;
}

void parse_checkpoints(const YAML::Node& node, const std::string& path, ScheduleConfig& sched,
                       std::optional<SweepSpec>* sweep, LineMap& lines) {
    MapReader r(node, path, lines);
    int given = 0;
    if (auto n = r.take("period")) {
        sched.period = scalar<std::int64_t>(*n, r.field("period"), "an integer");
        ++given;
    }
    if (auto n = r.take("times")) {
        sched.times = int_list(*n, r.field("times"));
        if (sched.times.empty()) fail(r.field("times"), *n, "list must not be empty");
        ++given;
    }
    if (sweep) {
        if (auto n = r.take("sweep")) {
            MapReader s(*n, r.field("sweep"), lines);
            SweepSpec spec;
            read(s, "count", spec.count, "an integer");
            read(s, "start", spec.start, "an integer");
            read(s, "end", spec.end, "an integer");
            s.finish();
            *sweep = spec;
            ++given;
        }
    }
    r.finish();
    if (given != 1)
        fail(path, node, sweep ? "give exactly one of period, times, sweep" : "give exactly one of period, times");
}

AgentEntry parse_agent(const YAML::Node& node, const std::string& path, LineMap& lines) {
    AgentEntry a;
    auto variant_of = [&](const YAML::Node& n, const std::string& p) {
        const auto name = scalar<std::string>(n, p, "an agent name");
        auto v = parse_variant(name);
        if (!v) fail(p, n, "unknown agent '" + name + "'; valid agents: " + variant_names());
        return *v;
    };
    if (node.IsScalar()) {
        lines[path] = line_of(node);
        a.variant = variant_of(node, path);
        a.label = std::string(to_string(a.variant));
        return a;
    }
    MapReader r(node, path, lines);
    auto v = r.take("variant");
    if (!v) fail(path + ".variant", node, "missing required key");
    a.variant = variant_of(*v, r.field("variant"));
    a.label = std::string(to_string(a.variant));
    read(r, "label", a.label, "a string");
    read(r, "alpha", a.alpha, "a number");
    read(r, "delta", a.delta, "a number");
    read(r, "lambda", a.lambda, "a number");
    if (auto c = r.take("checkpoints")) parse_checkpoints(*c, r.field("checkpoints"), a.checkpoints, nullptr, lines);
    r.finish();
    return a;
}

std::vector<AgentEntry> default_agents() {
    std::vector<AgentEntry> out;
    for (Variant v : {Variant::linucb, Variant::clucb, Variant::clucb2}) {
        AgentEntry a;
        a.variant = v;
        a.label = std::string(to_string(v));
        out.push_back(a);
    }
    return out;
}

struct Checker {
    const LineMap* lines = nullptr;

    void operator()(bool ok, const std::string& path, const std::string& msg) const {
        if (ok) return;
        int line = 0;
        if (lines) {
            auto it = lines->find(path);
            if (it != lines->end()) line = it->second;
        }
        throw ConfigError(located(path, line, msg));
    }
};

void validate_schedule(const ScheduleConfig& s, const std::string& path, const Checker& check) {
    check(!(s.period && !s.times.empty()), path, "give exactly one of period, times");
    if (s.period) check(*s.period >= 1, path + ".period", "must be >= 1");
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        check(s.times[i] >= 1, path + ".times", "entries must be >= 1");
        if (i > 0) check(s.times[i] > s.times[i - 1], path + ".times", "entries must be strictly increasing");
    }
}

bool finite(double x) { return std::isfinite(x); }

void check_alpha(double v, const std::string& path, const Checker& check) {
    check(finite(v) && v > 0.0 && v <= 1.0, path, "must lie in (0, 1]");
}
void check_delta(double v, const std::string& path, const Checker& check) {
    check(finite(v) && v > 0.0 && v < 1.0, path, "must lie in (0, 1)");
}
void check_lambda(double v, const std::string& path, const Checker& check) {
    check(finite(v) && v > 0.0, path, "must be > 0");
}

void validate_impl(const ExperimentConfig& c, const LineMap* lines) {
    const Checker check{lines};
    check(c.schema_version == kSchemaVersion, "schema_version",
          "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
    check(c.horizon >= 1, "horizon", "must be >= 1");
    check_alpha(c.alpha, "alpha", check);
    check_delta(c.delta, "delta", check);
    check_lambda(c.lambda, "lambda", check);
    check(c.n_models >= 1, "n_models", "must be >= 1");
    check(c.n_seeds >= 1, "n_seeds", "must be >= 1");
    check(c.baseline_rank >= 1, "baseline_rank", "must be >= 1");

    const EnvConfig& e = c.env;
    switch (e.kind) {
        case ModelKind::bernoulli_mab:
            check(e.k >= 1, "env.k", "must be >= 1");
            check(finite(e.mean_low) && e.mean_low >= 0.0 && e.mean_low <= 1.0, "env.mean_low",
                  "must lie in [0, 1]");
            check(finite(e.mean_high) && e.mean_high >= e.mean_low && e.mean_high <= 1.0, "env.mean_high",
                  "must lie in [mean_low, 1]");
            check(c.baseline_rank <= e.k, "baseline_rank", "must not exceed env.k");
            break;
        case ModelKind::linear:
            check(e.k >= 1, "env.k", "must be >= 1");
            check(e.dim >= 1, "env.dim", "must be >= 1");
            check(finite(e.noise_sd) && e.noise_sd >= 0.0, "env.noise_sd", "must be >= 0");
            check(c.baseline_rank <= e.k, "baseline_rank", "must not exceed env.k");
            break;
        case ModelKind::dataset:
            check(!e.path.empty(), "env.path", "dataset path required");
            check(finite(e.noise_sd) && e.noise_sd >= 0.0, "env.noise_sd", "must be >= 0");
            break;
    }

    check(!c.agents.empty(), "agents", "at least one agent required");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < c.agents.size(); ++i) {
        const AgentEntry& a = c.agents[i];
        const std::string p = "agents[" + std::to_string(i) + "]";
        check(!a.label.empty(), p + ".label", "must not be empty");
        check(a.label.find_first_of(",\"\n\r") == std::string::npos, p + ".label",
              "must not contain commas, quotes or newlines");
        check(labels.insert(a.label).second, p + ".label", "duplicate agent label '" + a.label + "'");
        if (a.alpha) check_alpha(*a.alpha, p + ".alpha", check);
        if (a.delta) check_delta(*a.delta, p + ".delta", check);
        if (a.lambda) check_lambda(*a.lambda, p + ".lambda", check);
        validate_schedule(a.checkpoints, p + ".checkpoints", check);
    }
    validate_schedule(c.checkpoints, "checkpoints", check);
    check(!(c.sweep && !c.checkpoints.empty()), "checkpoints", "give exactly one of period, times, sweep");
    if (c.sweep) {
        const SweepSpec& s = *c.sweep;
        check(s.count >= 1, "checkpoints.sweep.count", "must be >= 1");
        check(s.start >= 1 && s.start <= c.horizon, "checkpoints.sweep.start", "must lie in [1, horizon]");
        if (s.end) check(*s.end >= s.start && *s.end <= c.horizon, "checkpoints.sweep.end",
                         "must lie in [start, horizon]");
    }
    check(!c.output.dir.empty(), "output.dir", "must not be empty");
    check(c.output.curve_points >= 2, "output.curve_points", "must be >= 2");
}

ExperimentConfig parse_root(const YAML::Node& root) {
    LineMap lines;
    if (!root.IsDefined() || root.IsNull()) throw ConfigError("<root>: empty configuration");
    MapReader r(root, "", lines);
    ExperimentConfig c;
    read(r, "schema_version", c.schema_version, "an integer");
    auto env = r.take("env");
    if (!env) fail("env", root, "missing required key");
    c.env = parse_env(*env, lines);
    if (!r.has("horizon")) fail("horizon", root, "missing required key");
    read(r, "horizon", c.horizon, "an integer");
    read(r, "alpha", c.alpha, "a number");
    read(r, "delta", c.delta, "a number");
    read(r, "lambda", c.lambda, "a number");
    read(r, "baseline_rank", c.baseline_rank, "an integer");
    read(r, "n_models", c.n_models, "an integer");
    read(r, "n_seeds", c.n_seeds, "an integer");
    read(r, "root_seed", c.root_seed, "a nonnegative integer");
    if (auto a = r.take("agents")) {
        if (!a->IsSequence()) fail("agents", *a, "expected a list");
        for (std::size_t i = 0; i < a->size(); ++i)
            c.agents.push_back(parse_agent((*a)[i], "agents[" + std::to_string(i) + "]", lines));
    } else {
        c.agents = default_agents();
    }
    if (auto ck = r.take("checkpoints")) parse_checkpoints(*ck, "checkpoints", c.checkpoints, &c.sweep, lines);
    if (auto o = r.take("output")) {
        MapReader out(*o, "output", lines);
        read(out, "dir", c.output.dir, "a string");
        read(out, "curve_points", c.output.curve_points, "an integer");
        out.finish();
    }
    r.finish();
    validate_impl(c, &lines);
    return c;
}

void emit_schedule(YAML::Emitter& e, const ScheduleConfig& s) {
    e << YAML::BeginMap;
    if (s.period) e << YAML::Key << "period" << YAML::Value << *s.period;
    if (!s.times.empty()) e << YAML::Key << "times" << YAML::Value << YAML::Flow << s.times;
    e << YAML::EndMap;
}

}  // namespace

CheckpointSchedule ScheduleConfig::schedule() const {
    if (!times.empty()) return CheckpointSchedule::at(times);
    return CheckpointSchedule::every(period.value_or(1));
}

ExperimentConfig parse_config_text(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(located("<yaml>", e.mark.line >= 0 ? e.mark.line + 1 : 0, e.msg));
    }
    return parse_root(root);
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

void validate_config(const ExperimentConfig& cfg) { validate_impl(cfg, nullptr); }

std::string serialize_config(const ExperimentConfig& c) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "schema_version" << YAML::Value << c.schema_version;
    e << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "kind" << YAML::Value << to_string(c.env.kind);
    switch (c.env.kind) {
        case ModelKind::bernoulli_mab:
            e << YAML::Key << "k" << YAML::Value << c.env.k;
            e << YAML::Key << "mean_low" << YAML::Value << c.env.mean_low;
            e << YAML::Key << "mean_high" << YAML::Value << c.env.mean_high;
            break;
        case ModelKind::linear:
            e << YAML::Key << "k" << YAML::Value << c.env.k;
            e << YAML::Key << "dim" << YAML::Value << c.env.dim;
            e << YAML::Key << "noise_sd" << YAML::Value << c.env.noise_sd;
            break;
        case ModelKind::dataset:
            e << YAML::Key << "path" << YAML::Value << YAML::DoubleQuoted << c.env.path;
            e << YAML::Key << "noise_sd" << YAML::Value << c.env.noise_sd;
            break;
    }
    e << YAML::EndMap;
    e << YAML::Key << "horizon" << YAML::Value << c.horizon;
    e << YAML::Key << "alpha" << YAML::Value << c.alpha;
    e << YAML::Key << "delta" << YAML::Value << c.delta;
    e << YAML::Key << "lambda" << YAML::Value << c.lambda;
    e << YAML::Key << "baseline_rank" << YAML::Value << c.baseline_rank;
    e << YAML::Key << "n_models" << YAML::Value << c.n_models;
    e << YAML::Key << "n_seeds" << YAML::Value << c.n_seeds;
    e << YAML::Key << "root_seed" << YAML::Value << c.root_seed;
    e << YAML::Key << "agents" << YAML::Value << YAML::BeginSeq;
    for (const AgentEntry& a : c.agents) {
        e << YAML::BeginMap;
        e << YAML::Key << "variant" << YAML::Value << std::string(to_string(a.variant));
        e << YAML::Key << "label" << YAML::Value << YAML::DoubleQuoted << a.label;
        if (a.alpha) e << YAML::Key << "alpha" << YAML::Value << *a.alpha;
        if (a.delta) e << YAML::Key << "delta" << YAML::Value << *a.delta;
        if (a.lambda) e << YAML::Key << "lambda" << YAML::Value << *a.lambda;
        if (!a.checkpoints.empty()) {
            e << YAML::Key << "checkpoints" << YAML::Value;
            emit_schedule(e, a.checkpoints);
        }
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;
    if (c.sweep) {
        e << YAML::Key << "checkpoints" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
        e << YAML::Key << "count" << YAML::Value << c.sweep->count;
        e << YAML::Key << "start" << YAML::Value << c.sweep->start;
        if (c.sweep->end) e << YAML::Key << "end" << YAML::Value << *c.sweep->end;
        e << YAML::EndMap << YAML::EndMap;
    } else if (!c.checkpoints.empty()) {
        e << YAML::Key << "checkpoints" << YAML::Value;
        emit_schedule(e, c.checkpoints);
    }
    e << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "dir" << YAML::Value << YAML::DoubleQuoted << c.output.dir;
    e << YAML::Key << "curve_points" << YAML::Value << c.output.curve_points;
    e << YAML::EndMap;
    e << YAML::EndMap;
    if (!e.good()) throw ConfigError("serialize: " + e.GetLastError());
    return std::string(e.c_str()) + "\n";
}

std::vector<AgentSpec> resolve_agents(const ExperimentConfig& cfg) {
    std::vector<AgentSpec> out;
    for (const AgentEntry& a : cfg.agents) {
        AgentSpec s;
        s.label = a.label;
        s.variant = a.variant;
        s.alpha = a.alpha.value_or(cfg.alpha);
        s.delta = a.delta.value_or(cfg.delta);
        s.lambda = a.lambda.value_or(cfg.lambda);
        s.checkpoints = !a.checkpoints.empty() ? a.checkpoints.schedule() : cfg.checkpoints.schedule();
        out.push_back(std::move(s));
    }
    return out;
}

AgentSpec sweep_base(const ExperimentConfig& cfg) {
    AgentSpec s;
    s.alpha = cfg.alpha;
    s.delta = cfg.delta;
    s.lambda = cfg.lambda;
    return s;
}

std::vector<std::int64_t> sweep_periods(const ExperimentConfig& cfg) {
    if (!cfg.sweep) throw ConfigError("checkpoints.sweep: sweep spec required");
    return log_spaced_integers(cfg.sweep->count, cfg.sweep->start, cfg.sweep->end.value_or(cfg.horizon));
}

ModelFactory make_model_factory(const ExperimentConfig& cfg) {
    const EnvConfig env = cfg.env;
    const Eigen::Index rank = cfg.baseline_rank;
    switch (env.kind) {
        case ModelKind::bernoulli_mab:
            return [env, rank](std::int64_t, std::uint64_t seed) {
                return gen_bernoulli_model(seed, env.k, env.mean_low, env.mean_high, rank);
            };
        case ModelKind::linear:
            return [env, rank](std::int64_t, std::uint64_t seed) {
                return gen_linear_model(seed, env.k, env.dim, env.noise_sd, rank);
            };
        case ModelKind::dataset: {
            auto data = std::make_shared<const FactorDataset>(read_dataset(env.path));
            const auto users = data->users.rows();
            if (cfg.n_models > users)
                throw ConfigError("n_models: dataset has only " + std::to_string(users) + " users");
            if (rank > data->items.rows())
                throw ConfigError("baseline_rank: dataset has only " + std::to_string(data->items.rows()) +
                                  " items");
            std::vector<Eigen::Index> order(static_cast<std::size_t>(users));
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            Rng rng = derive_rng(cfg.root_seed, StreamKind::users, {});
            // Fisher-Yates by hand: std::shuffle's draws are implementation-defined.
            for (std::size_t i = order.size(); i > 1; --i) {
                const auto j = static_cast<std::size_t>(rng() % i);
                std::swap(order[i - 1], order[j]);
            }
            order.resize(static_cast<std::size_t>(cfg.n_models));
            return [data, order, env, rank](std::int64_t m, std::uint64_t) {
                return model_from_dataset(*data, order[static_cast<std::size_t>(m)], env.noise_sd, rank);
            };
        }
    }
    throw ConfigError("env.kind: unsupported");
}

}  // namespace cbandit
