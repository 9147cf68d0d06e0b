#pragma once

// Stochastic bandit environments with linear mean rewards
//     mu_a = <theta*, phi_a>,  r = mu_a + noise
// and the known-baseline information the conservative agents rely on.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbandit/rng.hpp"

namespace cbandit {

enum class ModelKind { bernoulli_mab, linear, dataset };

const char* to_string(ModelKind kind);

struct BanditModel {
    ModelKind kind = ModelKind::linear;
    Eigen::MatrixXd features;  // one row per arm
    Eigen::VectorXd theta_star;
    Eigen::VectorXd means;     // features * theta_star, cached
    double sigma = 0.5;        // subgaussian scale of the reward noise
    double noise_sd = 0.0;     // Gaussian noise sd (linear and dataset kinds)
    Eigen::Index baseline_rank = 1;
    double b_norm = 1.0;       // declared bound on ||theta*||
    double d_norm = 1.0;       // declared bound on ||phi_a||

    Eigen::Index arms() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

struct BaselineInfo {
    Eigen::Index baseline_arm = 0;
    double mu_b = 0.0;
    double mu_l = 0.0;
    double mu_h = 0.0;
    double delta_l = 0.0;
    double delta_h = 0.0;
};

/// Validates invariants and fills `means`. Throws ConfigError on violation.
BanditModel finalize_model(BanditModel model);

/// Arm indices sorted by decreasing mean; equal means keep increasing index order.
std::vector<Eigen::Index> rank_arms(const Eigen::VectorXd& means);

BanditModel gen_bernoulli_model(std::uint64_t seed, Eigen::Index k, double mean_low, double mean_high,
                                Eigen::Index baseline_rank);

BanditModel gen_linear_model(std::uint64_t seed, Eigen::Index k, Eigen::Index dim, double noise_sd,
                             Eigen::Index baseline_rank);

/// Item and user factor blocks as stored on disk.
struct FactorDataset {
    Eigen::MatrixXd items;  // K x d
    Eigen::MatrixXd users;  // M x d
};

FactorDataset read_dataset(const std::filesystem::path& path);
FactorDataset parse_dataset(const std::string& text);
void write_dataset(const std::filesystem::path& path, const FactorDataset& data);

/// Random low-rank factors standing in for a factorized rating matrix.
FactorDataset gen_synthetic_dataset(std::uint64_t seed, Eigen::Index items, Eigen::Index users,
                                    Eigen::Index dim);

/// Cold-start model for one user. Means are min-max normalized to [0,1]
/// across items; to keep the model linear the features gain a constant
/// coordinate, so the model dimension is d+1.
BanditModel model_from_dataset(const FactorDataset& data, Eigen::Index user_row, double noise_sd,
                               Eigen::Index baseline_rank);

BanditModel load_dataset_model(const std::filesystem::path& path, Eigen::Index user_row, double noise_sd,
                               Eigen::Index baseline_rank);

/// Draws one reward. The engine advances the same way whichever arm is pulled,
/// so agents run on the same seed see the same noise sequence.
double pull(const BanditModel& model, Eigen::Index arm, Rng& rng);

BaselineInfo baseline_info(const BanditModel& model);

}  // namespace cbandit
