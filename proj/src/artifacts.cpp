#include "cbandit/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cbandit/errors.hpp"

#ifndef CBANDIT_VERSION
#define CBANDIT_VERSION "unknown"
#endif

namespace cbandit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

const std::vector<std::string>& curves_columns() {
    static const std::vector<std::string> cols{"step", "agent", "model", "seed", "regret", "budget"};
    return cols;
}

const std::vector<std::string>& sweep_columns() {
    static const std::vector<std::string> cols{"T", "mean_delta", "stderr"};
    return cols;
}

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
}

// Tracks files written by one command so a failure can take them all back.
class OutputSet {
public:
    explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        if (!fs::exists(dir_, ec)) {
            if (!fs::create_directories(dir_, ec) || ec)
                throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
            created_dir_ = true;
        } else if (!fs::is_directory(dir_, ec)) {
            throw IoError("output path '" + dir_.string() + "' is not a directory");
        }
    }

    ~OutputSet() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& p : written_) fs::remove(p, ec);
        if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
    }

    template <class Fn>
    void write(const std::string& name, Fn&& fill) {
        const fs::path path = dir_ / name;
        const fs::path tmp = dir_ / (name + ".tmp");
        written_.push_back(tmp);
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write '" + tmp.string() + "'");
            fill(out);
            out.flush();
            if (!out) throw IoError("write failed for '" + tmp.string() + "'");
        }
        std::error_code ec;
        fs::rename(tmp, path, ec);
        if (ec) throw IoError("cannot rename '" + tmp.string() + "': " + ec.message());
        written_.push_back(path);
    }

    void commit() { committed_ = true; }

private:
    fs::path dir_;
    bool created_dir_ = false;
    bool committed_ = false;
    std::vector<fs::path> written_;
};

json run_json(const RunSummary& r) {
    json violations = json::array();
    for (const auto& [a, b] : r.violations) violations.push_back({a, b});
    return {
        {"agent", r.agent},
        {"model", r.model},
        {"seed", r.seed},
        {"final_regret", r.final_regret},
        {"final_realized_regret", r.final_realized_regret},
        {"final_budget", r.final_budget},
        {"min_budget", r.min_budget},
        {"events", {{"E1", r.e1}, {"E2", r.e2}, {"E3", r.e3}}},
        {"baseline_pulls", r.baseline_pulls},
        {"violations", violations},
        {"checkpoint_violations", r.checkpoint_violations},
    };
}

ReplicateOptions options_for(const ExperimentConfig& cfg, unsigned workers) {
    ReplicateOptions o;
    o.root_seed = cfg.root_seed;
    o.workers = workers;
    o.curve_points = cfg.output.curve_points;
    return o;
}

}  // namespace

const char* code_version() { return CBANDIT_VERSION; }

void write_curves_csv(std::ostream& out, const ExperimentSummary& summary) {
    write_header(out, curves_columns());
    for (const RunSummary& r : summary.runs)
        for (const CurvePoint& p : r.curve)
            out << p.step << ',' << r.agent << ',' << r.model << ',' << r.seed << ',' << fmt17(p.regret) << ','
                << fmt17(p.budget) << '\n';
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
    write_header(out, sweep_columns());
    for (const SweepPoint& p : points)
        out << p.period << ',' << fmt17(p.mean_delta) << ',' << fmt17(p.stderr_delta) << '\n';
}

std::string summary_json(const ExperimentSummary& summary) {
    json runs = json::array();
    for (const RunSummary& r : summary.runs) runs.push_back(run_json(r));
    json doc = {
        {"schema_version", kSummarySchema},
        {"horizon", summary.horizon},
        {"n_models", summary.n_models},
        {"n_seeds", summary.n_seeds},
        {"agents", summary.agents},
        {"runs", runs},
    };
    return doc.dump(2) + "\n";
}

ExperimentSummary parse_summary_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("summary.json: ") + e.what());
    }
    try {
        if (doc.at("schema_version").get<int>() != kSummarySchema)
            throw IoError("summary.json: unsupported schema version");
        ExperimentSummary s;
        s.horizon = doc.at("horizon").get<std::int64_t>();
        s.n_models = doc.at("n_models").get<std::int64_t>();
        s.n_seeds = doc.at("n_seeds").get<std::int64_t>();
        s.agents = doc.at("agents").get<std::vector<std::string>>();
        for (const json& j : doc.at("runs")) {
            RunSummary r;
            r.agent = j.at("agent").get<std::string>();
            r.model = j.at("model").get<std::int64_t>();
            r.seed = j.at("seed").get<std::int64_t>();
            r.final_regret = j.at("final_regret").get<double>();
            r.final_realized_regret = j.at("final_realized_regret").get<double>();
            r.final_budget = j.at("final_budget").get<double>();
            r.min_budget = j.at("min_budget").get<double>();
            r.e1 = j.at("events").at("E1").get<std::int64_t>();
            r.e2 = j.at("events").at("E2").get<std::int64_t>();
            r.e3 = j.at("events").at("E3").get<std::int64_t>();
            r.baseline_pulls = j.at("baseline_pulls").get<std::int64_t>();
            for (const json& v : j.at("violations")) r.violations.emplace_back(v.at(0).get<std::int64_t>(), v.at(1).get<std::int64_t>());
            r.checkpoint_violations = j.at("checkpoint_violations").get<std::int64_t>();
            s.runs.push_back(std::move(r));
        }
        const auto expected = static_cast<std::size_t>(s.n_models * s.n_seeds) * s.agents.size();
        if (s.runs.size() != expected) throw IoError("summary.json: run count does not match the header");
        return s;
    } catch (const json::exception& e) {
        throw IoError(std::string("summary.json: ") + e.what());
    }
}

ExperimentSummary read_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_summary_json(ss.str());
}

std::string manifest_json(const ExperimentConfig& cfg, const std::string& command) {
    json files = json::object();
    if (command == "run") {
        files["curves.csv"] = {{"schema_version", kCurvesSchema}, {"columns", curves_columns()}};
        files["summary.json"] = {{"schema_version", kSummarySchema}};
    } else {
        files["sweep.csv"] = {{"schema_version", kSweepSchema}, {"columns", sweep_columns()}};
    }
    json doc = {
        {"command", command},
        {"code_version", code_version()},
        {"config_schema_version", cfg.schema_version},
        {"root_seed", cfg.root_seed},
        {"config", serialize_config(cfg)},
        {"files", files},
    };
    return doc.dump(2) + "\n";
}

ExperimentSummary cmd_run(const ExperimentConfig& cfg, unsigned workers) {
    validate_config(cfg);
    const auto agents = resolve_agents(cfg);
    const ModelFactory factory = make_model_factory(cfg);
    OutputSet out(cfg.output.dir);
    ExperimentSummary summary =
        replicate(factory, cfg.n_models, cfg.n_seeds, agents, cfg.horizon, options_for(cfg, workers));
    out.write("curves.csv", [&](std::ostream& os) { write_curves_csv(os, summary); });
    out.write("summary.json", [&](std::ostream& os) { os << summary_json(summary); });
    out.write("manifest.json", [&](std::ostream& os) { os << manifest_json(cfg, "run"); });
    out.commit();
    return summary;
}

std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& cfg, unsigned workers) {
    validate_config(cfg);
    const auto periods = sweep_periods(cfg);
    const ModelFactory factory = make_model_factory(cfg);
    OutputSet out(cfg.output.dir);
    auto points = checkpoint_sweep(factory, cfg.n_models, cfg.n_seeds, periods, sweep_base(cfg), cfg.horizon,
                                   options_for(cfg, workers));
    out.write("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, points); });
    out.write("manifest.json", [&](std::ostream& os) { os << manifest_json(cfg, "sweep"); });
    out.commit();
    return points;
}

SelectReport cmd_select(const fs::path& dir, const std::string& agent_a, const std::string& agent_b,
                        SelectMode mode) {
    const ExperimentSummary s = read_summary(dir / "summary.json");
    const auto ia = s.agent_index(agent_a);
    const auto ib = s.agent_index(agent_b);
    if (!ia) throw ConfigError("agent '" + agent_a + "' not found in " + (dir / "summary.json").string());
    if (!ib) throw ConfigError("agent '" + agent_b + "' not found in " + (dir / "summary.json").string());
    SelectReport rep;
    for (std::int64_t m = 0; m < s.n_models; ++m) {
        rep.regret_a.push_back(s.mean_final_regret(*ia, m));
        rep.regret_b.push_back(s.mean_final_regret(*ib, m));
    }
    rep.selection = select_model(rep.regret_a, rep.regret_b, mode);
    return rep;
}

void print_select_report(std::ostream& out, const SelectReport& rep, const std::string& agent_a,
                         const std::string& agent_b) {
    out << "model,regret_" << agent_a << ",regret_" << agent_b << ",improvement\n";
    for (std::size_t m = 0; m < rep.regret_a.size(); ++m) {
        out << m << ',' << fmt17(rep.regret_a[m]) << ',' << fmt17(rep.regret_b[m]) << ',';
        if (rep.selection.improvement[m]) out << fmt17(*rep.selection.improvement[m]);
        else out << "excluded";
        out << '\n';
    }
    out << "selected model: " << rep.selection.model << '\n';
}

}  // namespace cbandit
