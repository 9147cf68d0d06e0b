#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "cbandit/environment.hpp"
#include "cbandit/errors.hpp"

using namespace cbandit;

TEST(Bernoulli, TenArmConfiguration) {
    const auto m = gen_bernoulli_model(123, 10, 0.25, 0.75, 4);
    EXPECT_EQ(m.arms(), 10);
    EXPECT_EQ(m.dim(), 10);
    EXPECT_TRUE(m.features.isIdentity());
    EXPECT_EQ(m.sigma, 0.5);
    for (Eigen::Index a = 0; a < 10; ++a) {
        EXPECT_GE(m.means(a), 0.25);
        EXPECT_LE(m.means(a), 0.75);
        EXPECT_EQ(m.means(a), m.theta_star(a));
    }
    const auto info = baseline_info(m);
    int better = 0;
    for (Eigen::Index a = 0; a < 10; ++a) better += m.means(a) > info.mu_b;
    EXPECT_EQ(better, 3);
    EXPECT_LE(m.theta_star.norm(), m.b_norm);
}

TEST(Bernoulli, Deterministic) {
    const auto a = gen_bernoulli_model(7, 10, 0.25, 0.75, 4);
    const auto b = gen_bernoulli_model(7, 10, 0.25, 0.75, 4);
    EXPECT_EQ(a.means, b.means);
    EXPECT_NE(a.means, gen_bernoulli_model(8, 10, 0.25, 0.75, 4).means);
}

TEST(Bernoulli, DegenerateRange) {
    const auto m = gen_bernoulli_model(1, 5, 0.5, 0.5, 3);
    for (Eigen::Index a = 0; a < 5; ++a) EXPECT_EQ(m.means(a), 0.5);
    EXPECT_EQ(baseline_info(m).mu_b, 0.5);
    EXPECT_EQ(baseline_info(m).baseline_arm, 2);  // ties keep index order
}

TEST(Bernoulli, RejectsBadArguments) {
    EXPECT_THROW(gen_bernoulli_model(1, 5, 0.6, 0.5, 1), ConfigError);
    EXPECT_THROW(gen_bernoulli_model(1, 5, -0.1, 0.5, 1), ConfigError);
    EXPECT_THROW(gen_bernoulli_model(1, 5, 0.1, 0.5, 6), ConfigError);
    EXPECT_THROW(gen_bernoulli_model(1, 5, 0.1, 0.5, 0), ConfigError);
}

TEST(Linear, MeansInRangeAndNormsBounded) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto m = gen_linear_model(seed, 30, 20, 0.1, 6);
        EXPECT_EQ(m.arms(), 30);
        EXPECT_LE(m.theta_star.norm(), 1.0);
        EXPECT_LE(m.features.rowwise().norm().maxCoeff(), 1.0);
        const Eigen::VectorXd mu = m.features * m.theta_star;
        EXPECT_GE(mu.minCoeff(), 0.0);
        EXPECT_LE(mu.maxCoeff(), 1.0);
        EXPECT_EQ(m.noise_sd, 0.1);
    }
}

TEST(Linear, HighDimensionAndDeterminism) {
    const auto a = gen_linear_model(3, 30, 100, 0.1, 6);
    const auto b = gen_linear_model(3, 30, 100, 0.1, 6);
    EXPECT_EQ(a.dim(), 100);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.theta_star, b.theta_star);
}

TEST(Linear, RejectsBadArguments) {
    EXPECT_THROW(gen_linear_model(1, 1, 3, 0.1, 1), ConfigError);
    EXPECT_THROW(gen_linear_model(1, 3, 0, 0.1, 1), ConfigError);
    EXPECT_THROW(gen_linear_model(1, 3, 2, -0.1, 1), ConfigError);
}

TEST(Ranking, PermutationWithIndexTies) {
    Eigen::VectorXd mu(5);
    mu << 0.3, 0.9, 0.3, 0.1, 0.9;
    const auto order = rank_arms(mu);
    const std::vector<Eigen::Index> expected{1, 4, 0, 2, 3};
    EXPECT_EQ(order, expected);
    EXPECT_EQ(std::set<Eigen::Index>(order.begin(), order.end()).size(), 5u);
}

TEST(BaselineInfo, Examples) {
    BanditModel m;
    m.kind = ModelKind::bernoulli_mab;
    m.features = Eigen::MatrixXd::Identity(3, 3);
    m.theta_star = Eigen::Vector3d(0.9, 0.7, 0.5);
    m.b_norm = 2.0;
    m.baseline_rank = 2;
    auto info = baseline_info(finalize_model(m));
    EXPECT_EQ(info.baseline_arm, 1);
    EXPECT_NEAR(info.delta_h, 0.2, 1e-15);
    EXPECT_EQ(info.mu_l, info.mu_b);
    EXPECT_EQ(info.mu_h, info.mu_b);
    m.baseline_rank = 1;
    EXPECT_EQ(baseline_info(finalize_model(m)).delta_h, 0.0);
    m.baseline_rank = 3;
    EXPECT_EQ(baseline_info(finalize_model(m)).baseline_arm, 2);
}

TEST(Pull, BernoulliExtremesAndLinearNoiseless) {
    BanditModel m;
    m.kind = ModelKind::bernoulli_mab;
    m.features = Eigen::MatrixXd::Identity(2, 2);
    m.theta_star = Eigen::Vector2d(1.0, 0.0);
    m.b_norm = 1.0;
    m = finalize_model(m);
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(pull(m, 0, rng), 1.0);
        EXPECT_EQ(pull(m, 1, rng), 0.0);
    }
    auto lin = gen_linear_model(2, 4, 3, 0.0, 1);
    EXPECT_EQ(pull(lin, 2, rng), lin.means(2));
    EXPECT_THROW(pull(lin, 4, rng), ConfigError);
}

TEST(Pull, SampleMeanConverges) {
    const auto lin = gen_linear_model(5, 5, 4, 0.1, 2);
    const auto bern = gen_bernoulli_model(5, 5, 0.25, 0.75, 2);
    Rng rng(99);
    const int n = 100000;
    double s_lin = 0.0, s_bern = 0.0;
    for (int i = 0; i < n; ++i) {
        s_lin += pull(lin, 1, rng);
        s_bern += pull(bern, 3, rng);
    }
    EXPECT_NEAR(s_lin / n, lin.means(1), 3.0 * 0.1 / std::sqrt(n));
    const double sd = std::sqrt(bern.means(3) * (1.0 - bern.means(3)));
    EXPECT_NEAR(s_bern / n, bern.means(3), 3.0 * sd / std::sqrt(n));
}

TEST(Pull, SameStreamWhicheverArm) {
    // Two agents on one seed see the same noise draws step for step.
    const auto lin = gen_linear_model(5, 5, 4, 0.1, 2);
    Rng a(3), b(3);
    for (int i = 0; i < 50; ++i) {
        const double ra = pull(lin, 0, a) - lin.means(0);
        const double rb = pull(lin, 4, b) - lin.means(4);
        EXPECT_NEAR(ra, rb, 1e-12);
    }
}

TEST(Dataset, ParseAndNormalize) {
    const std::string text =
        "ITEMS 3 2\n"
        "1 0\n"
        "0 1\n"
        "0.5 0.5\n"
        "\n"
        "USERS 2 2\n"
        "2 -1\n"
        "1 1\n";
    const auto data = parse_dataset(text);
    EXPECT_EQ(data.items.rows(), 3);
    EXPECT_EQ(data.users.rows(), 2);
    const auto m = model_from_dataset(data, 0, 0.1, 2);
    EXPECT_EQ(m.arms(), 3);
    EXPECT_EQ(m.dim(), 3);
    // raw ratings 2, -1, 0.5 -> normalized 1, 0, 0.5
    EXPECT_NEAR(m.means(0), 1.0, 1e-12);
    EXPECT_NEAR(m.means(1), 0.0, 1e-12);
    EXPECT_NEAR(m.means(2), 0.5, 1e-12);
    EXPECT_LE(m.features.rowwise().norm().maxCoeff(), 1.0 + 1e-12);
    EXPECT_EQ(baseline_info(m).baseline_arm, 2);
}

TEST(Dataset, Errors) {
    try {
        parse_dataset("ITEMS 2 2\n1 0\n0 x\nUSERS 1 2\n1 1\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
    EXPECT_THROW(parse_dataset("ITEMS 2 2\n1 0\n0 1\nUSERS 1 3\n1 1 1\n"), ParseError);
    const auto single = parse_dataset("ITEMS 1 2\n1 0\nUSERS 1 2\n1 1\n");
    EXPECT_THROW(model_from_dataset(single, 0, 0.1, 1), ConfigError);
    const auto two = parse_dataset("ITEMS 2 2\n1 0\n0 1\nUSERS 1 2\n1 1\n");
    EXPECT_THROW(model_from_dataset(two, 0, 0.1, 1), ConfigError);  // constant ratings
    EXPECT_THROW(model_from_dataset(two, 5, 0.1, 1), ConfigError);
}

TEST(Dataset, SyntheticRoundTripThroughFile) {
    const auto data = gen_synthetic_dataset(11, 40, 20, 35);
    const auto path = std::filesystem::temp_directory_path() / "cbandit_test_dataset.txt";
    write_dataset(path, data);
    const auto back = read_dataset(path);
    EXPECT_EQ(back.items, data.items);
    EXPECT_EQ(back.users, data.users);
    const auto m = load_dataset_model(path, 0, 0.1, 3);
    EXPECT_EQ(m.arms(), 40);
    EXPECT_NEAR(m.means.minCoeff(), 0.0, 1e-12);
    EXPECT_NEAR(m.means.maxCoeff(), 1.0, 1e-12);
    // independent recomputation of the normalized ratings
    const Eigen::VectorXd raw = data.items * data.users.row(0).transpose();
    const Eigen::VectorXd expect = (raw.array() - raw.minCoeff()) / (raw.maxCoeff() - raw.minCoeff());
    EXPECT_LE((m.means - expect).cwiseAbs().maxCoeff(), 1e-12);
    std::filesystem::remove(path);
}
