#include <gtest/gtest.h>

#include <cmath>

#include "i2drnn/capacity.hpp"

using namespace i2drnn;

namespace {

MiCurve curve(std::vector<double> v) {
  MiCurve c;
  for (std::size_t i = 0; i < v.size(); ++i) c.lags.push_back(static_cast<long>(i));
  c.mi = std::move(v);
  c.flags.assign(c.mi.size(), "");
  return c;
}

std::vector<std::size_t> grid(std::size_t from, std::size_t step, std::size_t n) {
  std::vector<std::size_t> g;
  for (std::size_t i = 0; i < n; ++i) g.push_back(from + i * step);
  return g;
}

}  // namespace

TEST(Lambda1, Examples) {
  EXPECT_NEAR(lambda1(0.75), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(lambda1(0.36), 0.4 / 0.72, 1e-15);
  EXPECT_NEAR(lambda1(1e-12), 0.5, 1e-12);
  EXPECT_THROW(lambda1(0.0), ConfigError);
  EXPECT_THROW(lambda1(1.0), ConfigError);
}

TEST(Lambda1, AgreesWithLongRangeSolver) {
  for (int i = 1; i <= 9; ++i) {
    const double k = 0.1 * i;
    LambdaObjective obj;
    obj.kind = LambdaObjectiveKind::LongRange;
    obj.k = k;
    obj.hx = unit_gaussian_hx();
    EXPECT_NEAR(solve_lambda_numeric(obj, 2000).lambda, lambda1(k), 1e-4) << "k=" << k;
  }
  std::vector<std::string> flags;
  lambda_chain(0.36, 1, &flags);
  EXPECT_TRUE(flags.empty());
}

TEST(Lambda1, HorizonStability) {
  LambdaObjective obj;
  obj.kind = LambdaObjectiveKind::LongRange;
  obj.k = 0.2;
  obj.hx = unit_gaussian_hx();
  EXPECT_LT(std::abs(solve_lambda_numeric(obj, 10).lambda - solve_lambda_numeric(obj, 200).lambda), 1e-3);
  EXPECT_THROW(solve_lambda_numeric(obj, 9), ConfigError);
}

TEST(Solver, SymmetricAndFlat) {
  const auto s = maximize_on_interval([](double x) { return -(x - 0.5) * (x - 0.5); });
  EXPECT_NEAR(s.lambda, 0.5, 1e-8);
  EXPECT_FALSE(s.flat);
  const auto f = maximize_on_interval([](double) { return 3.0; });
  EXPECT_TRUE(f.flat);
  EXPECT_NEAR(f.lambda, 0.5, 1e-12);
  const auto edge = maximize_on_interval([](double x) { return x; });
  EXPECT_NEAR(edge.lambda, 1.0 - 1e-4, 1e-9);
}

TEST(Lambda2, Examples) {
  const auto r = lambda2(0.3, 0.3);
  EXPECT_FALSE(r.fallback);
  EXPECT_NEAR(r.value, (1 - std::sqrt(0.31)) / 0.69, 1e-14);
  EXPECT_NEAR(r.value, 0.6423, 1e-4);
  const auto fb = lambda2(0.5, 0.5);
  EXPECT_TRUE(fb.fallback);
  EXPECT_GT(fb.value, 0.0);
  EXPECT_LT(fb.value, 1.0);
  EXPECT_NEAR(lambda2(1e-9, 1e-9).value, 0.5, 1e-8);
  // The root annihilates the quadratic.
  const double s = 0.3 + 0.3 + 0.09;
  EXPECT_NEAR(1 - 2 * r.value + s * r.value * r.value, 0.0, 1e-14);
}

TEST(Lambda3, Examples) {
  for (double k = 0.05; k < 1; k += 0.1)
    for (double l2 = 0.05; l2 < 1; l2 += 0.1) {
      EXPECT_EQ(lambda3_polynomial(0.0, k, l2), 1.0);
      EXPECT_NEAR(lambda3_polynomial(1.0, k, l2), -(1 - k) * (1 - l2), 1e-14);
      EXPECT_LT(lambda3_polynomial(1.0, k, l2), 0.0);
      const double x = lambda3(k, l2);
      EXPECT_NEAR(lambda3_polynomial(x, k, l2), 0.0, 1e-9);
    }
  // 1 - 2x + 0.96x^2 - 0.216x^3 crosses zero at 0.69622; 0.698 is only a rounded figure
  EXPECT_NEAR(lambda3(0.36, 0.6), 0.69622, 1e-5);
  EXPECT_NEAR(lambda3(0.36, 0.6), 0.698, 0.005 * 0.698);
  const double l2 = 0.6;
  EXPECT_NEAR(lambda3(1e-12, l2), (1 - std::sqrt(1 - l2)) / l2, 1e-9);
}

TEST(LayerCurve, Properties) {
  const double hx = unit_gaussian_hx();
  const auto a = layer_info_curve(0.5, 10, 1.0, hx, 20);
  const auto b = layer_info_curve(0.5, 20, 1.0, hx, 20);
  ASSERT_EQ(a.mi.size(), 21u);
  EXPECT_EQ(a.lags.front(), 0);
  EXPECT_NEAR(a.mi[0], input_rate({10, 0.5, 1.0, hx}), 1e-14);
  for (std::size_t i = 0; i < a.mi.size(); ++i) EXPECT_NEAR(b.mi[i], 2 * a.mi[i], 1e-12 * b.mi[i]);
  const auto c = layer_info_curve(0.7, 10, 1.0, hx, 20);
  for (std::size_t i = 1; i < a.mi.size(); ++i) EXPECT_GT(c.mi[i], a.mi[i]);
  EXPECT_THROW(layer_info_curve(0.5, 10, 1.0, hx, 0), ConfigError);
}

TEST(Capacity, OverallAndIcap) {
  EXPECT_EQ(overall_capacity({curve({3, 1})}), 4.0);
  EXPECT_EQ(overall_capacity({curve({3, 1}), curve({3, 1})}), 4.0);
  EXPECT_EQ(overall_capacity({curve({3, 1}), curve({1, 2})}), 5.0);
  EXPECT_THROW(overall_capacity({curve({3, 1}), curve({1, 2, 3})}), DimensionError);

  ExpFit g{2.0, 0.5, 0, 2, false};  // g = [2, 1]
  const auto e = icap_estimate(g, {curve({1, 2})}, 1);
  EXPECT_EQ(e.icap, 2.0);
  EXPECT_EQ(e.total_info, 3.0);
  const auto sat = icap_estimate(g, {curve({5, 5})}, 1);
  EXPECT_EQ(sat.icap, 3.0);
  EXPECT_EQ(sat.alpha, 1.0);
  EXPECT_EQ(icap_estimate(g, {curve({0, 0})}, 1).icap, 0.0);
  EXPECT_TRUE(e.short_horizon);
  EXPECT_LE(e.icap, e.capacity);
}

TEST(Capacity, CoverageTauMax) {
  const std::size_t t = coverage_tau_max(0.5);
  EXPECT_GE(1 - std::pow(0.5, t + 1), 0.99);
  EXPECT_LT(1 - std::pow(0.5, t), 0.99);
  EXPECT_EQ(coverage_tau_max(0.9999), 500u);
}

TEST(Config, NecessaryExamples) {
  const auto g = grid(10, 10, 20);
  std::vector<double> sat, lin, convex;
  for (auto h : g) {
    sat.push_back(std::min<double>(h, 100));
    lin.push_back(3.0 * h);
    convex.push_back(double(h) * h);
  }
  const auto n = necessary_config(g, sat);
  EXPECT_EQ(n.size, 100u);
  EXPECT_TRUE(n.flags.empty());
  const auto l = necessary_config(g, lin);
  EXPECT_EQ(l.size, 20u);
  ASSERT_EQ(l.flags.size(), 1u);
  EXPECT_EQ(l.flags[0], "no_curvature");
  const auto c = necessary_config(g, convex);
  ASSERT_EQ(c.flags.size(), 1u);
  EXPECT_EQ(c.flags[0], "convex");
  EXPECT_THROW(necessary_config(grid(10, 10, 4), {1, 2, 3, 4}), ConfigError);
}

TEST(Config, SufficientExamples) {
  const auto g = grid(20, 20, 10);
  std::vector<double> v;
  for (auto h : g) v.push_back(h >= 120 ? 50.0 : 50.0 * h / 140.0);
  EXPECT_EQ(sufficient_config(g, v, 50.0).size, 120u);
  const auto un = sufficient_config(g, v, 100.0);
  EXPECT_EQ(un.size, 200u);
  ASSERT_EQ(un.flags.size(), 1u);
  EXPECT_EQ(un.flags[0], "unsaturated");
  std::vector<double> w;
  for (auto h : g) w.push_back(std::min(1.0, h / 100.0) * (h >= 100 ? 1.0 : 0.97));
  EXPECT_GE(sufficient_config(g, w, 1.0, 0.01).size, sufficient_config(g, w, 1.0, 0.05).size);
  EXPECT_THROW(sufficient_config(g, v, 0.0), ConfigError);
  EXPECT_THROW(sufficient_config(g, v, 1.0, 0.2), ConfigError);
}

TEST(Config, CurvePipeline) {
  ExpFit g{1.0, 0.36, 0, 10, false};
  const double hx = unit_gaussian_hx();
  CapacityOptions o;
  o.hx = hx;
  LayerPlan plan{2};
  const auto c = config_curve(g, plan, grid(2, 2, 30), o);
  ASSERT_EQ(c.lambdas.size(), 2u);
  EXPECT_NEAR(c.lambdas[0], 0.4 / 0.72, 1e-12);
  const auto l2 = lambda2(0.36, c.lambdas[0]);
  EXPECT_EQ(c.lambdas[1], l2.value);
  EXPECT_EQ(c.has_flag("lambda2_fallback"), l2.fallback);
  for (std::size_t i = 1; i < c.icap.size(); ++i) EXPECT_GE(c.icap[i], c.icap[i - 1]);
  EXPECT_FALSE(c.has_flag("icap_not_monotone"));
  for (std::size_t i = 0; i < c.icap.size(); ++i) {
    EXPECT_LE(c.icap[i], c.total_info + 1e-12);
    EXPECT_LE(c.icap[i], c.capacity[i] + 1e-12);
  }
  // Large enough totals saturate at the data information.
  EXPECT_NEAR(c.icap.back(), c.total_info, 1e-9);
  EXPECT_FALSE(c.has_flag("unsaturated"));
  EXPECT_LE(c.necessary, c.sufficient);
  EXPECT_EQ(c.tau_max, coverage_tau_max(0.36));
  EXPECT_THROW(config_curve(g, plan, grid(2, 2, 4), o), ConfigError);
  EXPECT_THROW(config_curve(g, plan, {2, 4, 6, 9, 10}, o), ConfigError);
}

TEST(Config, ThreeLayerChain) {
  const auto l = lambda_chain(0.36, 3);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_NEAR(l[2], lambda3(0.36, l[1]), 0.0);
  EXPECT_EQ(LayerPlan{3}.split(10), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_THROW(LayerPlan{4}.split(10), ConfigError);
}
