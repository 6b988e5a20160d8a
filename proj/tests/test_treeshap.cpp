#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "textrisk/gbdt/gbdt.hpp"

using namespace textrisk;
using namespace textrisk::gbdt;
using textrisk::testing::brute_force_shapley;
using textrisk::testing::random_dataset;

TEST(TreeShap, StumpPutsEverythingOnItsFeature) {
  Matrix x(8, 3);
  std::vector<int> y(8);
  for (std::size_t i = 0; i < 8; ++i) {
    x(i, 0) = static_cast<double>(i % 2);
    x(i, 1) = static_cast<double>(i);
    x(i, 2) = 1.0;
    y[i] = i >= 4;
  }
  GbdtParams p;
  p.n_estimators = 1;
  p.max_depth = 1;
  p.eta = 1;
  p.alpha = 0;
  p.min_child_weight = 0;
  const auto m = fit(x, y, p, 1);
  ASSERT_EQ(m.trees[0].feature[0], 1);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto s = tree_shap(m, x.row(i));
    EXPECT_NEAR(s.phi[1], m.margin(x.row(i)) - s.base, 1e-12);
    EXPECT_EQ(s.phi[0], 0.0);
    EXPECT_EQ(s.phi[2], 0.0);
  }
}

TEST(TreeShap, LocalAccuracyOnThousandRows) {
  const auto d = random_dataset(1000, 10, 31);
  GbdtParams p;
  p.n_estimators = 60;
  p.max_depth = 6;
  p.subsample = 0.8;
  p.colsample_bytree = 0.7;
  const auto m = fit(d.x, d.y, p, 4);
  const auto shap = tree_shap_batch(m, d.x);
  const auto margin = m.predict_margin(d.x);
  double worst = 0;
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    double s = shap.base;
    for (std::size_t c = 0; c < d.x.cols(); ++c) s += shap.phi(i, c);
    worst = std::max(worst, std::abs(s - margin[i]));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(TreeShap, MatchesExhaustiveShapley) {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t p = static_cast<std::size_t>(rng.between(1, 4));
    const auto d = random_dataset(150, p, 100 + static_cast<std::uint64_t>(trial), trial % 2 == 1);
    GbdtParams params;
    params.n_estimators = static_cast<int>(rng.between(1, 8));
    params.max_depth = static_cast<int>(rng.between(1, 5));
    params.subsample = trial % 3 ? 1.0 : 0.8;
    params.min_child_weight = rng.uniform(0, 3);
    const auto m = fit(d.x, d.y, params, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 0; i < 20; ++i) {
      const auto fast = tree_shap(m, d.x.row(i));
      const auto slow = brute_force_shapley(m, d.x.row(i));
      for (std::size_t c = 0; c < p; ++c) EXPECT_NEAR(fast.phi[c], slow[c], 1e-6) << "trial " << trial;
    }
  }
}

TEST(TreeShap, BaseIsExpectedMargin) {
  const auto d = random_dataset(300, 3, 2);
  const auto m = fit(d.x, d.y, GbdtParams{}, 1);
  double expected = m.base_margin;
  for (const auto& t : m.trees) expected += t.expected_value();
  EXPECT_NEAR(tree_shap(m, d.x.row(0)).base, expected, 1e-12);
  // the empty coalition of the brute-force value function is the same number
  double v0 = m.base_margin;
  for (const auto& t : m.trees) v0 += textrisk::testing::tree_conditional(t, d.x.row(0), 0u);
  EXPECT_NEAR(expected, v0, 1e-9);
}

TEST(TreeShap, AdditiveAcrossTrees) {
  const auto d = random_dataset(200, 5, 6);
  GbdtParams p;
  p.n_estimators = 12;
  const auto m = fit(d.x, d.y, p, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto all = tree_shap(m, d.x.row(i));
    std::vector<double> sum(5, 0.0);
    for (const auto& t : m.trees) tree_shap_add(t, d.x.row(i), sum);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(all.phi[c], sum[c], 1e-12);
  }
}

TEST(TreeShap, BatchSerialEqualsParallel) {
  const auto d = random_dataset(500, 6, 8);
  const auto m = fit(d.x, d.y, GbdtParams{}, 2);
  const auto a = tree_shap_batch(m, d.x, Exec::serial);
  const auto b = tree_shap_batch(m, d.x, Exec::parallel);
  EXPECT_EQ(a.base, b.base);
  for (std::size_t i = 0; i < 500; ++i)
    for (std::size_t c = 0; c < 6; ++c) ASSERT_EQ(a.phi(i, c), b.phi(i, c));
}
