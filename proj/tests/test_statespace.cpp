#include <cmath>

#include <gtest/gtest.h>

#include "dlm/components.hpp"
#include "dlm/errors.hpp"
#include "dlm/statespace.hpp"

namespace {

dlm::ParameterVector trend_theta(double level, double trend, double obs = 1.0) {
    dlm::ParameterVector p;
    p.add("sl", level, dlm::Domain::nonnegative).add("st", trend, dlm::Domain::nonnegative);
    p.add("obs", obs, dlm::Domain::nonnegative);
    return p;
}

TEST(Compose, LevelTrendSeasonalRegressionLayout) {
    Eigen::MatrixXd z(5, 1);
    z << 0.5, 1.5, -2.0, 3.0, 4.0;
    auto model = dlm::compose({dlm::local_level_trend("trend", "sl", "st"), dlm::seasonal_harmonics("seas", 12, 2, "ss"),
                               dlm::regression_block("proxy", dlm::CovariateMatrix(z, {"z"}), {"sz"})},
                              dlm::ObservationNoise::isotropic("obs"));
    EXPECT_EQ(model.state_dim(), 7);
    auto theta = trend_theta(0.1, 0.2);
    theta.add("ss", 0.3, dlm::Domain::nonnegative).add("sz", 0.0, dlm::Domain::nonnegative);
    const auto s = model.materialize(2, theta);
    Eigen::RowVectorXd expected(7);
    expected << 1, 0, 1, 0, 1, 0, -2.0;
    EXPECT_EQ(s.H, expected);
    ASSERT_EQ(model.layout().blocks().size(), 3u);
    EXPECT_EQ(model.layout().find("seas")->offset, 2);
    EXPECT_EQ(model.layout().find("seas")->size, 4);
    EXPECT_EQ(model.layout().find("proxy")->offset, 6);
    // Block-diagonal M and Q.
    EXPECT_TRUE(s.M.block(0, 2, 2, 5).isZero());
    EXPECT_TRUE(s.Q.block(2, 0, 4, 2).isZero());
    EXPECT_DOUBLE_EQ(s.Q(2, 2), 0.09);
}

TEST(Compose, SingleBlockIsIdentityComposition) {
    auto model = dlm::compose({dlm::local_level_trend("trend", "sl", "st")}, dlm::ObservationNoise::isotropic("obs"));
    const auto s = model.materialize(0, trend_theta(0.0, 0.0, 0.3));
    Eigen::Matrix2d M;
    M << 1, 1, 0, 1;
    EXPECT_EQ(s.M, Eigen::MatrixXd(M));
    EXPECT_EQ(s.H, (Eigen::RowVector2d(1, 0)));
    EXPECT_TRUE(s.Q.isZero());
    EXPECT_DOUBLE_EQ(s.R(0, 0), 0.09);
}

TEST(Compose, MismatchedObservationDimensionFails) {
    auto a = dlm::custom_block("a", Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1));
    auto b = dlm::custom_block("b", Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Ones(2, 1), Eigen::MatrixXd::Zero(1, 1));
    EXPECT_THROW(dlm::compose({a, b}, dlm::ObservationNoise::isotropic("obs")), dlm::DimensionError);
}

TEST(Compose, DuplicateNamesFail) {
    EXPECT_THROW(dlm::compose({dlm::local_level("x", "a"), dlm::local_level("x", "b")},
                              dlm::ObservationNoise::isotropic("obs")),
                 dlm::ConfigError);
}

TEST(Compose, NestedCompositionMatchesFlat) {
    auto a = dlm::local_level_trend("trend", "sl", "st");
    auto b = dlm::seasonal_harmonics("seas", 7, 1, "ss");
    auto c = dlm::ar_block("ar", {"rho"}, "sar");
    auto noise = dlm::ObservationNoise::isotropic("obs");
    auto flat = dlm::compose({a, b, c}, noise);
    auto inner = dlm::compose({b, c}, noise);
    auto nested = dlm::compose({a, dlm::as_block(inner, "inner")}, noise);
    auto theta = trend_theta(0.1, 0.2);
    theta.add("ss", 0.3, dlm::Domain::nonnegative).add("rho", 0.4, dlm::Domain::unit_interval);
    theta.add("sar", 0.5, dlm::Domain::nonnegative);
    for (Eigen::Index t : {0, 3, 9}) {
        const auto s1 = flat.materialize(t, theta), s2 = nested.materialize(t, theta);
        EXPECT_EQ(s1.M, s2.M);
        EXPECT_EQ(s1.H, s2.H);
        EXPECT_EQ(s1.Q, s2.Q);
        EXPECT_EQ(s1.R, s2.R);
    }
}

TEST(Materialize, NegativeStandardDeviationIsDomainError) {
    auto model = dlm::compose({dlm::local_level_trend("trend", "sl", "st")}, dlm::ObservationNoise::isotropic("obs"));
    EXPECT_THROW((void)model.materialize(0, trend_theta(-0.1, 0.0)), dlm::DomainError);
}

TEST(Materialize, MissingSlotIsConfigError) {
    auto model = dlm::compose({dlm::local_level_trend("trend", "sl", "st")}, dlm::ObservationNoise::isotropic("obs"));
    dlm::ParameterVector p;
    p.add("sl", 0.1, dlm::Domain::nonnegative);
    EXPECT_THROW((void)model.materialize(0, p), dlm::ConfigError);
}

TEST(Materialize, PureFunctionOfTimeAndTheta) {
    auto model = dlm::compose({dlm::local_level_trend("trend", "sl", "st"), dlm::seasonal_harmonics("s", 12, 1, "ss")},
                              dlm::ObservationNoise::isotropic("obs"));
    auto theta = trend_theta(0.1, 0.2);
    theta.add("ss", 0.3, dlm::Domain::nonnegative);
    const auto a = model.materialize(4, theta), b = model.materialize(4, theta);
    EXPECT_EQ(a.M, b.M);
    EXPECT_EQ(a.Q, b.Q);
}

TEST(Validate, ComposedModelsArePsdOnGrid) {
    Eigen::MatrixXd z = Eigen::MatrixXd::Random(30, 2);
    auto model = dlm::compose({dlm::local_level_trend("trend", "sl", "st"), dlm::seasonal_harmonics("s", 12, 3, "ss"),
                               dlm::ar_block("ar", {"r1", "r2"}, "sar"),
                               dlm::regression_block("reg", dlm::CovariateMatrix(z, {"a", "b"}), {"za", "zb"})},
                              dlm::ObservationNoise::isotropic("obs"));
    for (double scale : {0.0, 0.1, 3.0}) {
        auto theta = trend_theta(scale, 2 * scale, 1.0);
        theta.add("ss", scale, dlm::Domain::nonnegative).add("r1", 0.5, dlm::Domain::real).add("r2", -0.2, dlm::Domain::real);
        theta.add("sar", scale, dlm::Domain::nonnegative).add("za", scale, dlm::Domain::nonnegative);
        theta.add("zb", 0.0, dlm::Domain::nonnegative);
        const auto report = dlm::validate(model, theta, 30);
        EXPECT_TRUE(report.ok) << (report.problems.empty() ? "" : report.problems.front());
    }
}

TEST(Layout, RangesPartitionStateVector) {
    auto model = dlm::compose({dlm::local_level("l", "a"), dlm::seasonal_harmonics("s", 12, 2, "b"),
                               dlm::ar_block("ar", {"r1", "r2", "r3"}, "c")},
                              dlm::ObservationNoise::isotropic("obs"));
    Eigen::Index next = 0;
    const std::vector<Eigen::Index> dims{1, 4, 3};
    for (std::size_t i = 0; i < model.layout().blocks().size(); ++i) {
        const auto& b = model.layout().blocks()[i];
        EXPECT_EQ(b.offset, next);
        EXPECT_EQ(b.size, dims[i]);
        next += b.size;
    }
    EXPECT_EQ(next, model.state_dim());
}

TEST(InitialState, DiffuseAndKappaChecks) {
    const auto init = dlm::InitialState::diffuse(3, 1e5);
    EXPECT_EQ(init.covariance, 1e5 * Eigen::MatrixXd::Identity(3, 3));
    EXPECT_THROW(dlm::InitialState::diffuse(2, 0.0), dlm::DomainError);
    Eigen::MatrixXd v(4, 1);
    v << 1, 2, 3, 4;
    EXPECT_NEAR(dlm::default_kappa(dlm::TimeSeries(v)), 1e7 * 5.0 / 3.0, 1e-3);
}

}  // namespace
