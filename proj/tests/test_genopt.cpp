#include <gtest/gtest.h>

#include <atomic>
#include <numeric>
#include <cmath>
#include <sstream>

#include "support.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/genopt/genopt.hpp"
#include "textrisk/stats/stats.hpp"

using namespace textrisk;
using namespace textrisk::genopt;

TEST(Genes, MatchHyperparameterTable) {
  const auto& g = table_genes();
  ASSERT_EQ(g.size(), 10u);
  struct Row {
    const char* name;
    double lo, hi;
    bool integer;
  };
  const Row expected[] = {{"scale_pos_weight", 0.1, 10, false}, {"eta", 0.001, 0.5, false},
                          {"subsample", 0.7, 1, false},         {"n_estimators", 2, 500, true},
                          {"colsample_bytree", 0.3, 1, false},  {"max_depth", 2, 12, true},
                          {"lambda", 0.5, 10, false},           {"alpha", 0.5, 10, false},
                          {"gamma", 0, 10, false},              {"min_child_weight", 0, 10, false}};
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(g[i].name, expected[i].name);
    EXPECT_EQ(g[i].lo, expected[i].lo);
    EXPECT_EQ(g[i].hi, expected[i].hi);
    EXPECT_EQ(g[i].kind == GeneKind::integer, expected[i].integer);
  }
}

TEST(Genes, ParamsRoundTrip) {
  Rng rng(1);
  const auto g = random_genome(table_genes(), rng);
  EXPECT_TRUE(within_bounds(g, table_genes()));
  const auto p = to_params(g);
  EXPECT_NO_THROW(gbdt::validate_table_ranges(p));
  EXPECT_EQ(to_params(from_params(p)), p);
}

TEST(Crossover, IdenticalParents) {
  Rng rng(2);
  const auto a = random_genome(table_genes(), rng);
  for (int i = 0; i < 50; ++i) {
    const auto [c, d] = crossover_two_point(a, a, rng, 1.0);
    EXPECT_EQ(c, a);
    EXPECT_EQ(d, a);
  }
}

TEST(Crossover, FullSwapAtEnds) {
  Rng rng(3);
  const auto a = random_genome(table_genes(), rng);
  const auto b = random_genome(table_genes(), rng);
  const auto [c, d] = crossover_at(a, b, 0, a.size());
  EXPECT_EQ(c, b);
  EXPECT_EQ(d, a);
}

TEST(Crossover, ChildrenGenesComeFromParentsAtSamePosition) {
  Rng rng(4);
  int unchanged = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto a = random_genome(table_genes(), rng);
    const auto b = random_genome(table_genes(), rng);
    const auto [c, d] = crossover_two_point(a, b, rng, 0.8);
    EXPECT_TRUE(within_bounds(c, table_genes()));
    EXPECT_TRUE(within_bounds(d, table_genes()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_TRUE((c[i] == a[i] && d[i] == b[i]) || (c[i] == b[i] && d[i] == a[i]));
    }
    if (c == a && d == b) ++unchanged;
  }
  // copies happen with probability 0.2 (plus nothing else leaves both intact)
  EXPECT_NEAR(unchanged / 2000.0, 0.2, 0.03);
}

TEST(Mutation, ZeroProbabilityIsIdentity) {
  Rng rng(5);
  for (int t = 0; t < 100; ++t) {
    auto g = random_genome(table_genes(), rng);
    const auto before = g;
    mutate_random_reset(g, table_genes(), rng, 0.0);
    EXPECT_EQ(g, before);
  }
}

TEST(Mutation, ResetIsUniformWithinBounds) {
  Rng rng(6);
  const auto& spec = table_genes();
  const int draws = 10000, bins = 10;
  std::vector<std::vector<double>> counts(spec.size(), std::vector<double>(bins, 0.0));
  std::vector<std::vector<double>> int_counts(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (spec[i].kind == GeneKind::integer) int_counts[i].assign(static_cast<std::size_t>(spec[i].hi - spec[i].lo + 1), 0.0);
  auto g = random_genome(spec, rng);
  for (int t = 0; t < draws; ++t) {
    mutate_random_reset(g, spec, rng, 1.0);
    ASSERT_TRUE(within_bounds(g, spec));
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (spec[i].kind == GeneKind::integer) {
        ASSERT_EQ(g[i], std::round(g[i]));
        int_counts[i][static_cast<std::size_t>(g[i] - spec[i].lo)] += 1;
      } else {
        auto b = static_cast<std::size_t>((g[i] - spec[i].lo) / (spec[i].hi - spec[i].lo) * bins);
        counts[i][std::min<std::size_t>(b, bins - 1)] += 1;
      }
    }
  }
  auto chi2_p = [](const std::vector<double>& c) {
    const double expected = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
    double s = 0;
    for (double v : c) s += (v - expected) * (v - expected) / expected;
    return stats::chi2_sf(s, static_cast<double>(c.size() - 1));
  };
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const double p = spec[i].kind == GeneKind::integer ? chi2_p(int_counts[i]) : chi2_p(counts[i]);
    EXPECT_GT(p, 1e-4) << spec[i].name;
  }
}

TEST(Tournament, WinnerIsFitterContestant) {
  std::vector<Individual> pop{{{0}, 1.0}, {{1}, 2.0}};
  Rng rng(7);
  int better = 0;
  for (int t = 0; t < 20000; ++t) better += tournament(pop, rng, 2) == 1;
  // the weaker one only wins when drawn twice
  EXPECT_NEAR(better / 20000.0, 0.75, 0.015);
}

TEST(Tournament, TiesSplitEvenly) {
  std::vector<Individual> pop{{{0}, 1.0}, {{1}, 1.0}};
  Rng rng(8);
  int first = 0;
  for (int t = 0; t < 20000; ++t) first += tournament(pop, rng, 2) == 0;
  EXPECT_NEAR(first / 20000.0, 0.5, 0.015);
}

TEST(Tournament, WinnerNeverWorseThanAnyOtherDraw) {
  Rng rng(9);
  std::vector<Individual> pop;
  for (int i = 0; i < 30; ++i) pop.push_back({{static_cast<double>(i)}, rng.uniform()});
  // with size = population size and replacement, the winner is at least the median
  for (int t = 0; t < 200; ++t) {
    const auto w = tournament(pop, rng, 60);
    int worse = 0;
    for (const auto& ind : pop) worse += ind.fitness < pop[w].fitness;
    EXPECT_GE(worse, 15);
  }
}

TEST(Evolve, ProtocolCountsAndMonotoneHistory) {
  std::atomic<int> calls{0};
  const FitnessFn stub = [&](const Genome& g) {
    ++calls;
    return -std::abs(g[1] - 0.1) - std::abs(g[5] - 7) / 10;
  };
  EvolveOptions o;
  o.seed = 11;
  const auto r = evolve(stub, table_genes(), o);
  EXPECT_EQ(r.children_total, 3000u);
  EXPECT_EQ(r.initial_population, 150u);
  ASSERT_EQ(r.history.size(), 21u);
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    EXPECT_EQ(r.history[g].children, 150u);
    EXPECT_EQ(r.history[g].population, 150u);
    EXPECT_GE(r.history[g].best_fitness, r.history[g - 1].best_fitness);
  }
  EXPECT_EQ(r.fitness_evaluations + r.cache_hits, 3150u);
  EXPECT_EQ(static_cast<std::size_t>(calls.load()), r.fitness_evaluations);
  EXPECT_EQ(r.best.fitness, r.history.back().best_fitness);
}

TEST(Evolve, Reproducible) {
  const FitnessFn f = [](const Genome& g) { return std::sin(g[0]) + g[2]; };
  EvolveOptions o;
  o.mu = 20;
  o.lambda = 20;
  o.generations = 5;
  o.seed = 3;
  std::ostringstream a, b;
  write_history_csv(a, evolve(f, table_genes(), o), table_genes());
  o.exec = Exec::serial;
  write_history_csv(b, evolve(f, table_genes(), o), table_genes());
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "generation,best_fitness,mean_fitness,best_genome_json");
}

TEST(Evolve, QuadraticLandscapeWithinFivePercent) {
  // peak of 1 at eta = 0.2, lambda = 3 (interior points)
  const auto& spec = table_genes();
  auto landscape = [&](double eta, double lam) {
    const double u = (eta - 0.2) / (spec[1].hi - spec[1].lo);
    const double v = (lam - 3.0) / (spec[6].hi - spec[6].lo);
    return 1.0 - u * u - v * v;
  };
  double grid_best = -1e9;
  for (int i = 0; i <= 400; ++i)
    for (int j = 0; j <= 400; ++j)
      grid_best = std::max(grid_best, landscape(spec[1].lo + (spec[1].hi - spec[1].lo) * i / 400.0,
                                                spec[6].lo + (spec[6].hi - spec[6].lo) * j / 400.0));
  EvolveOptions o;
  o.seed = 21;
  const auto r = evolve([&](const Genome& g) { return landscape(g[1], g[6]); }, spec, o);
  EXPECT_GE(r.best.fitness, 0.95 * grid_best);
  EXPECT_NEAR(grid_best, 1.0, 1e-3);
}

TEST(Evolve, FitnessErrorCarriesGenome) {
  EvolveOptions o;
  o.mu = 4;
  o.lambda = 4;
  o.generations = 1;
  try {
    evolve([](const Genome&) -> double { throw Error(Errc::numeric, "boom"); }, table_genes(), o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::numeric);
    EXPECT_NE(std::string(e.what()).find("scale_pos_weight"), std::string::npos);
  }
}

TEST(CanonicalKey, TwelveSignificantDigits) {
  Genome a(10, 0.123456789012345), b(10, 0.1234567890124);
  EXPECT_EQ(canonical_key(a), canonical_key(b));
  b[0] = 0.1234567891;
  EXPECT_NE(canonical_key(a), canonical_key(b));
}

TEST(CvFitness, MajorityClassIsHalf) {
  auto d = textrisk::testing::random_dataset(200, 3, 4);
  for (std::size_t i = 0; i < 200; ++i) d.y[i] = i % 5 == 0;
  std::vector<int> folds(200);
  for (std::size_t i = 0; i < 200; ++i) folds[i] = static_cast<int>((i / 5) % 5);
  gbdt::GbdtParams p;
  p.gamma = 10;  // no split is worth it
  p.max_depth = 2;
  p.n_estimators = 5;
  p.min_child_weight = 10;
  EXPECT_DOUBLE_EQ(cv_fitness(p, d.x, d.y, folds, 5, 1), 0.5);
}

TEST(CvFitness, SeparableIsNearOneAndMeanOfFolds) {
  Rng rng(6);
  Matrix x(300, 2);
  std::vector<int> y(300), folds(300);
  for (std::size_t i = 0; i < 300; ++i) {
    y[i] = i % 3 == 0;
    x(i, 0) = (y[i] ? 1.0 : -1.0) + 0.1 * rng.uniform(-1, 1);
    x(i, 1) = rng.uniform();
    folds[i] = static_cast<int>(i % 5);
  }
  gbdt::GbdtParams p;
  p.n_estimators = 20;
  p.max_depth = 2;
  p.scale_pos_weight = 2;
  const double f = cv_fitness(p, x, y, folds, 5, 3);
  EXPECT_GT(f, 0.99);
  const auto per = cv_fold_bacc(p, x, y, folds, 5, 3);
  ASSERT_EQ(per.size(), 5u);
  EXPECT_DOUBLE_EQ(f, std::accumulate(per.begin(), per.end(), 0.0) / 5.0);
}
