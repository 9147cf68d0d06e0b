#include "cbandit/environment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "cbandit/errors.hpp"

namespace cbandit {

namespace {

constexpr double kMeanTolerance = 1e-12;
constexpr std::int64_t kMaxRejections = 1000000;

Eigen::VectorXd sample_unit_ball(Eigen::Index dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd v(dim);
    double n = 0.0;
    do {
        for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
        n = v.norm();
    } while (n == 0.0);
    const double radius = std::pow(unif(rng), 1.0 / static_cast<double>(dim));
    return v * (radius / n);
}

}  // namespace

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::bernoulli_mab: return "bernoulli";
        case ModelKind::linear: return "linear";
        case ModelKind::dataset: return "dataset";
    }
    return "unknown";
}

BanditModel finalize_model(BanditModel model) {
    if (model.features.rows() < 1 || model.features.cols() < 1)
        throw ConfigError("model: needs at least one arm and one feature");
    if (model.theta_star.size() != model.features.cols())
        throw DimensionError("model: theta* dimension does not match features");
    if (model.baseline_rank < 1 || model.baseline_rank > model.arms())
        throw ConfigError("model: baseline rank must lie in [1, K]");
    if (!(model.sigma >= 0.0) || !(model.noise_sd >= 0.0))
        throw ConfigError("model: noise scales must be nonnegative");

    model.means = model.features * model.theta_star;
    for (Eigen::Index a = 0; a < model.arms(); ++a) {
        const double mu = model.means(a);
        if (!(mu >= -kMeanTolerance && mu <= 1.0 + kMeanTolerance))
            throw ConfigError("model: arm " + std::to_string(a) + " has mean outside [0,1]");
        model.means(a) = std::clamp(mu, 0.0, 1.0);
    }
    if (model.theta_star.norm() > model.b_norm * (1.0 + 1e-12))
        throw ConfigError("model: ||theta*|| exceeds declared bound B");
    if (model.features.rowwise().norm().maxCoeff() > model.d_norm * (1.0 + 1e-12))
        throw ConfigError("model: feature norm exceeds declared bound D");
    return model;
}

std::vector<Eigen::Index> rank_arms(const Eigen::VectorXd& means) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(means.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return means(a) > means(b); });
    return order;
}

BanditModel gen_bernoulli_model(std::uint64_t seed, Eigen::Index k, double mean_low, double mean_high,
                                Eigen::Index baseline_rank) {
    if (k < 1) throw ConfigError("bernoulli model: k must be >= 1");
    if (!(mean_low >= 0.0 && mean_low <= mean_high && mean_high <= 1.0))
        throw ConfigError("bernoulli model: need 0 <= mean_low <= mean_high <= 1");

    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    BanditModel m;
    m.kind = ModelKind::bernoulli_mab;
    m.features = Eigen::MatrixXd::Identity(k, k);
    m.theta_star.resize(k);
    for (Eigen::Index a = 0; a < k; ++a) m.theta_star(a) = mean_low + (mean_high - mean_low) * unif(rng);
    m.sigma = 0.5;
    m.noise_sd = 0.0;
    m.baseline_rank = baseline_rank;
    m.b_norm = std::sqrt(static_cast<double>(k)) * mean_high;
    m.d_norm = 1.0;
    return finalize_model(std::move(m));
}

BanditModel gen_linear_model(std::uint64_t seed, Eigen::Index k, Eigen::Index dim, double noise_sd,
                             Eigen::Index baseline_rank) {
    if (k < 2) throw ConfigError("linear model: k must be >= 2");
    if (dim < 1) throw ConfigError("linear model: dim must be >= 1");
    if (!(noise_sd >= 0.0)) throw ConfigError("linear model: noise_sd must be >= 0");

    Rng rng(seed);
    BanditModel m;
    m.kind = ModelKind::linear;
    m.theta_star = sample_unit_ball(dim, rng);
    m.features.resize(k, dim);
    for (Eigen::Index a = 0; a < k; ++a) {
        std::int64_t attempts = 0;
        for (;;) {
            if (++attempts > kMaxRejections)
                throw GenerationError("linear model: could not draw a feature with mean in [0,1] for arm " +
                                      std::to_string(a));
            const Eigen::VectorXd phi = sample_unit_ball(dim, rng);
            const double mu = phi.dot(m.theta_star);
            if (mu >= 0.0 && mu <= 1.0) {
                m.features.row(a) = phi.transpose();
                break;
            }
        }
    }
    m.sigma = noise_sd;
    m.noise_sd = noise_sd;
    m.baseline_rank = baseline_rank;
    m.b_norm = 1.0;
    m.d_norm = 1.0;
    return finalize_model(std::move(m));
}

FactorDataset parse_dataset(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;

    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };

    auto read_header = [&](const std::string& tag, Eigen::Index& rows, Eigen::Index& cols) {
        if (!next_line()) throw ParseError("expected '" + tag + " <count> <dim>' header", line_no + 1);
        std::istringstream hs(line);
        std::string word;
        long long r = -1, c = -1;
        std::string extra;
        if (!(hs >> word >> r >> c) || word != tag || (hs >> extra))
            throw ParseError("expected '" + tag + " <count> <dim>' header", line_no);
        if (r < 1 || c < 1) throw ParseError(tag + " header needs positive count and dim", line_no);
        rows = static_cast<Eigen::Index>(r);
        cols = static_cast<Eigen::Index>(c);
    };

    auto read_block = [&](Eigen::MatrixXd& block, Eigen::Index rows, Eigen::Index cols, const std::string& tag) {
        block.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (!next_line())
                throw ParseError(tag + " block ended after " + std::to_string(i) + " of " +
                                     std::to_string(rows) + " rows",
                                 line_no + 1);
            std::istringstream ls(line);
            for (Eigen::Index j = 0; j < cols; ++j) {
                std::string tok;
                if (!(ls >> tok))
                    throw ParseError("expected " + std::to_string(cols) + " values, found " + std::to_string(j),
                                     line_no);
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(tok, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != tok.size() || !std::isfinite(v))
                    throw ParseError("invalid number '" + tok + "'", line_no);
                block(i, j) = v;
            }
            std::string extra;
            if (ls >> extra) throw ParseError("more than " + std::to_string(cols) + " values on row", line_no);
        }
    };

    FactorDataset data;
    Eigen::Index k = 0, d_items = 0, m = 0, d_users = 0;
    read_header("ITEMS", k, d_items);
    read_block(data.items, k, d_items, "ITEMS");
    read_header("USERS", m, d_users);
    const int users_line = line_no;
    if (d_users != d_items)
        throw ParseError("USERS dimension " + std::to_string(d_users) + " does not match ITEMS dimension " +
                             std::to_string(d_items),
                         users_line);
    read_block(data.users, m, d_users, "USERS");
    if (next_line()) throw ParseError("unexpected content after USERS block", line_no);
    return data;
}

FactorDataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_dataset(ss.str());
}

void write_dataset(const std::filesystem::path& path, const FactorDataset& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
    out << std::setprecision(17);
    auto block = [&](const char* tag, const Eigen::MatrixXd& m) {
        out << tag << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            for (Eigen::Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
            out << '\n';
        }
    };
    block("ITEMS", data.items);
    block("USERS", data.users);
    if (!out) throw std::runtime_error("failed writing dataset file " + path.string());
}

FactorDataset gen_synthetic_dataset(std::uint64_t seed, Eigen::Index items, Eigen::Index users,
                                    Eigen::Index dim) {
    if (items < 2 || users < 1 || dim < 1)
        throw ConfigError("synthetic dataset: need items >= 2, users >= 1, dim >= 1");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    FactorDataset data;
    data.items.resize(items, dim);
    data.users.resize(users, dim);
    for (Eigen::Index i = 0; i < items; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) data.items(i, j) = normal(rng) * scale;
    for (Eigen::Index i = 0; i < users; ++i)
        for (Eigen::Index j = 0; j < dim; ++j) data.users(i, j) = normal(rng);
    return data;
}

BanditModel model_from_dataset(const FactorDataset& data, Eigen::Index user_row, double noise_sd,
                               Eigen::Index baseline_rank) {
    const Eigen::Index k = data.items.rows();
    const Eigen::Index d = data.items.cols();
    if (k < 2) throw ConfigError("dataset model: at least 2 items are required");
    if (data.users.cols() != d) throw DimensionError("dataset model: user and item dimensions differ");
    if (user_row < 0 || user_row >= data.users.rows())
        throw ConfigError("dataset model: user row " + std::to_string(user_row) + " out of range [0, " +
                          std::to_string(data.users.rows()) + ")");
    if (!(noise_sd >= 0.0)) throw ConfigError("dataset model: noise_sd must be >= 0");

    const Eigen::VectorXd user = data.users.row(user_row).transpose();
    const Eigen::VectorXd raw = data.items * user;
    const double lo = raw.minCoeff();
    const double span = raw.maxCoeff() - lo;
    if (!(span > 0.0)) throw ConfigError("dataset model: selected user rates all items equally");

    // mu = (raw - lo) / span written as <theta, phi> with
    // phi = (item / R, 1) / sqrt(2), so ||phi|| <= 1.
    const double r = std::max(data.items.rowwise().norm().maxCoeff(), 1e-300);
    const double s2 = std::sqrt(2.0);
    BanditModel m;
    m.kind = ModelKind::dataset;
    m.features.resize(k, d + 1);
    m.features.leftCols(d) = data.items / (r * s2);
    m.features.col(d).setConstant(1.0 / s2);
    m.theta_star.resize(d + 1);
    m.theta_star.head(d) = user * (r * s2 / span);
    m.theta_star(d) = -lo * s2 / span;
    m.sigma = noise_sd;
    m.noise_sd = noise_sd;
    m.baseline_rank = baseline_rank;
    m.d_norm = 1.0;
    m.b_norm = m.theta_star.norm();
    return finalize_model(std::move(m));
}

BanditModel load_dataset_model(const std::filesystem::path& path, Eigen::Index user_row, double noise_sd,
                               Eigen::Index baseline_rank) {
    return model_from_dataset(read_dataset(path), user_row, noise_sd, baseline_rank);
}

double pull(const BanditModel& model, Eigen::Index arm, Rng& rng) {
    if (arm < 0 || arm >= model.arms()) throw ConfigError("pull: invalid arm index " + std::to_string(arm));
    const double mu = model.means(arm);
    if (model.kind == ModelKind::bernoulli_mab) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        return unif(rng) < mu ? 1.0 : 0.0;
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    return mu + model.noise_sd * normal(rng);
}

BaselineInfo baseline_info(const BanditModel& model) {
    const auto order = rank_arms(model.means);
    BaselineInfo info;
    info.baseline_arm = order[static_cast<std::size_t>(model.baseline_rank - 1)];
    info.mu_b = model.means(info.baseline_arm);
    info.mu_l = info.mu_b;
    info.mu_h = info.mu_b;
    info.delta_h = model.means(order.front()) - info.mu_b;
    info.delta_l = info.delta_h;
    return info;
}

}  // namespace cbandit
