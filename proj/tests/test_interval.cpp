#include "predframe/interval.hpp"
#include "predframe/model.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace predframe;

TEST(SplitPlan, Reference) {
  const auto p = make_split_plan(1000, 0.5, 0.8);
  EXPECT_EQ(p.T_E, 749u);
  EXPECT_EQ(p.T_P, 969u);
  EXPECT_DOUBLE_EQ(p.m_TE, std::sqrt(749.0));
  EXPECT_NEAR(p.gap_ratio(), 31 / std::log(1000.0), 1e-12);
}

TEST(SplitPlan, ExactPowersFloorCorrectly) {
  const auto p = make_split_plan(10000, 0.5, 0.75);
  EXPECT_EQ(p.T_P, 10000u - 100u);
  EXPECT_EQ(p.T_E, 10000u - 1000u);
}

TEST(SplitPlan, Infeasible) {
  EXPECT_THROW(make_split_plan(10, 0.5, 0.99), InfeasibleSplit);
  EXPECT_THROW(make_split_plan(1000, 0.5, 0.5001), InfeasibleSplit);
  EXPECT_THROW(make_split_plan(7, 0.3, 0.6), StructuralError);
  EXPECT_THROW(make_split_plan(1000, 0.8, 0.5), StructuralError);
}

TEST(NormalQuantile, Values) {
  EXPECT_EQ(normal_quantile(0.5), 0.0);
  EXPECT_NEAR(normal_quantile(0.975), 1.959964, 1e-6);
  EXPECT_NEAR(normal_quantile(0.95), 1.644854, 1e-6);
  for (double p : {1e-10, 1e-4, 0.01, 0.3, 0.7, 0.99, 1 - 1e-6}) {
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-12 * std::max(p, 1e-3)) << p;
  }
  EXPECT_THROW(normal_quantile(0.0), StructuralError);
  EXPECT_THROW(normal_quantile(1.0), StructuralError);
}

TEST(Interval, Ar1TwoProcessHandExample) {
  const Series est({1.0, 0.5, 0.25});
  const Series pred({0.3, 2.0});
  const auto ci = ci_two_process(ModelKind::AR1, est, pred, {}, 0.95);
  EXPECT_DOUBLE_EQ(ci.center, 1.0);
  EXPECT_NEAR(ci.v_hat, 1.732051, 1e-6);
  EXPECT_NEAR(ci.half_width, 1.959964 * 1.732051 / std::sqrt(3.0), 1e-5);
  EXPECT_EQ(ci.scheme, Scheme::TwoProcess);
}

TEST(Interval, ZeroGradientGivesPointInterval) {
  const auto ci = ci_two_process(ModelKind::AR1, Series({1.0, 0.5, 0.25}), Series({1.0, 0.0}), {}, 0.9);
  EXPECT_EQ(ci.v_hat, 0.0);
  EXPECT_EQ(ci.half_width, 0.0);
  EXPECT_EQ(ci.center, 0.0);
}

TEST(Interval, NaivePlugin) {
  const auto ci = ci_naive_plugin(ModelKind::AR1, Series({1.0, 0.5, 0.25}), {}, 0.9);
  EXPECT_DOUBLE_EQ(ci.center, 0.125);
  const auto again = ci_naive_plugin(ModelKind::AR1, Series({1.0, 0.5, 0.25}), {}, 0.9);
  EXPECT_EQ(ci.center, again.center);
  EXPECT_EQ(ci.half_width, again.half_width);
}

TEST(Interval, HalfWidthShrinksWithLevel) {
  const auto x = simulate(ParamVector::ar1(0.5), {}, 300, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (double level : {0.99, 0.9, 0.5, 0.1, 0.01}) {
    const auto ci = ci_naive_plugin(ModelKind::AR1, x, {}, level);
    EXPECT_LT(ci.half_width, prev);
    prev = ci.half_width;
  }
}

TEST(Interval, SampleSplitBookkeeping) {
  const auto x = simulate(ParamVector::ar1(0.5), {}, 1000, 12);
  const auto plan = make_split_plan(1000, 0.5, 0.8);
  const auto spl = ci_sample_split(ModelKind::AR1, x, plan, 0.9);
  EXPECT_EQ(*spl.T_E, 749u);
  EXPECT_EQ(*spl.T_P, 969u);
  EXPECT_DOUBLE_EQ(spl.scale, std::sqrt(749.0));

  const auto est = estimate_ar1_ols(x.slice(1, 749));
  EXPECT_EQ(spl.theta_hat[0], est.theta_hat.beta());
  EXPECT_EQ(spl.center, est.theta_hat.beta() * x.at(1000));

  const auto tip = ci_two_process(ModelKind::AR1, x.slice(1, 749), x.slice(969, 1000), {}, 0.9);
  EXPECT_EQ(spl.center, tip.center);
  EXPECT_EQ(spl.half_width, tip.half_width);
}

TEST(Interval, SampleSplitTruncatesGarchWindow) {
  const auto theta = ParamVector::garch11(0.1, 0.1, 0.8);
  const auto x = simulate(theta, {}, 1000, 13);
  const auto plan = make_split_plan(1000, 0.5, 0.8);
  const auto spl = ci_sample_split(ModelKind::GARCH11, x, plan, 0.9);
  const auto tip = ci_two_process(ModelKind::GARCH11, x.slice(1, 749), x.slice(969, 1000), {}, 0.9);
  EXPECT_NEAR(spl.center, tip.center, 1e-14);
  EXPECT_NEAR(spl.half_width, tip.half_width, 1e-14);
  EXPECT_THROW(ci_sample_split(ModelKind::GARCH11, x.slice(1, 999), plan, 0.9), StructuralError);
}

TEST(Interval, PositivityFloor) {
  // v_hat^2 >= lambda_min(Upsilon_hat) |grad|^2 >= lambda_min |d psi / d omega|^2
  const auto theta = ParamVector::garch11(0.1, 0.1, 0.8);
  const auto x = simulate(theta, {}, 2000, 14);
  const auto ci = ci_naive_plugin(ModelKind::GARCH11, x, {}, 0.9);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ci.upsilon_hat);
  const double kappa = eig.eigenvalues().minCoeff();
  EXPECT_GE(ci.v_hat * ci.v_hat, kappa * ci.gradient[0] * ci.gradient[0] * (1 - 1e-12));
}

TEST(Interval, LevelValidated) {
  EXPECT_THROW(ci_naive_plugin(ModelKind::AR1, Series({1.0, 0.5, 0.25}), {}, 1.0), StructuralError);
}
