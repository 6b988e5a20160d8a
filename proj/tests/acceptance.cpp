// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "support.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/data/ingest.hpp"
#include "textrisk/folds/folds.hpp"
#include "textrisk/genopt/genopt.hpp"
#include "textrisk/pipeline/commands.hpp"
#include "textrisk/pipeline/synth.hpp"
#include "textrisk/scorehead/train.hpp"
#include "textrisk/stats/stats.hpp"

using namespace textrisk;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Kind { pass, fail, skip } kind = pass;
  std::string detail;
};

int failures = 0;

// Runs one criterion; a budget overrun or an exception is a failure.
void criterion(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {Outcome::fail, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.kind != Outcome::skip && secs > budget_seconds) {
    o.kind = Outcome::fail;
    o.detail += "; over the " + std::to_string(static_cast<int>(budget_seconds)) + " s budget";
  }
  const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
  if (o.kind == Outcome::fail) ++failures;
  std::printf("%s  %-28s %8.2fs  %s\n", tag, name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::pass : Outcome::fail, std::move(detail)}; }

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------- criteria

Outcome grid_cardinality() {
  const auto grid = scorehead::enumerate_grid();
  std::set<std::string> keys;
  for (const auto& c : grid) keys.insert(c.canonical().key());
  return verdict(grid.size() == 126 && keys.size() == 126,
                 std::to_string(grid.size()) + " configs, " + std::to_string(keys.size()) + " unique");
}

Outcome ga_protocol() {
  const auto& spec = genopt::table_genes();
  // Smooth stub landscape over normalised genes, peak in the interior.
  auto fitness = [&](const genopt::Genome& g) {
    double s = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double u = (g[i] - spec[i].lo) / (spec[i].hi - spec[i].lo) - 0.37;
      s += u * u;
    }
    return 1.0 - s;
  };
  genopt::EvolveOptions o;
  o.mu = 150;
  o.lambda = 150;
  o.generations = 20;
  o.seed = 5;
  const auto r = genopt::evolve(fitness, spec, o);
  bool monotone = true;
  bool per_gen = true;
  for (std::size_t g = 1; g < r.history.size(); ++g) {
    monotone = monotone && r.history[g].best_fitness >= r.history[g - 1].best_fitness;
    per_gen = per_gen && r.history[g].children == 150 && r.history[g].population == 150;
  }
  const bool ok = r.children_total == 3000 && r.history.size() == 21 && monotone && per_gen;
  return verdict(ok, std::to_string(r.children_total) + " children over " + std::to_string(r.history.size() - 1) +
                         " generations, best history " + (monotone ? "non-decreasing" : "DECREASES") +
                         ", final best " + fmt(r.best.fitness));
}

Outcome gbdt_oracle() {
  Rng rng(77);
  int datasets = 0, splits = 0, mismatches = 0;
  double worst = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const auto n = static_cast<std::size_t>(rng.between(10, 200));
    const auto p = static_cast<std::size_t>(rng.between(1, 5));
    const auto d = testing::random_dataset(n, p, 10000 + static_cast<std::uint64_t>(trial), trial % 2 == 0);
    const auto params = testing::stump_params(rng.uniform(0.0, 3.0), trial % 3 ? rng.uniform(0.0, 2.0) : 0.0,
                                              rng.uniform(0.0, 5.0), rng.uniform(0.5, 4.0), rng.uniform(0.05, 1.0));
    const auto m = gbdt::fit(d.x, d.y, params, 3);
    const auto o = testing::oracle_stump(d.x, d.y, params);
    const auto& t = m.trees.at(0);
    ++datasets;
    if (!o.split) {
      if (t.size() != 1) ++mismatches;
      else worst = std::max(worst, std::abs(t.leaf_value[0] - o.root));
      continue;
    }
    if (t.size() != 3 || static_cast<std::size_t>(t.feature[0]) != o.feature || t.threshold[0] != o.threshold) {
      ++mismatches;
      continue;
    }
    ++splits;
    worst = std::max(worst, std::abs(t.leaf_value[static_cast<std::size_t>(t.left[0])] - o.left));
    worst = std::max(worst, std::abs(t.leaf_value[static_cast<std::size_t>(t.right[0])] - o.right));
  }
  // Logloss over 50 rounds at eta 0.01.
  int increases = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = testing::random_dataset(100 + 5 * static_cast<std::size_t>(trial), 2 + trial % 5,
                                           20000 + static_cast<std::uint64_t>(trial));
    gbdt::GbdtParams p;
    p.eta = 0.01;
    p.n_estimators = 50;
    p.max_depth = 1 + trial % 6;
    p.scale_pos_weight = 1.0 + trial % 4;
    const auto m = gbdt::fit(d.x, d.y, p, static_cast<std::uint64_t>(trial));
    double prev = gbdt::training_loss(m, d.x, d.y, 0);
    for (std::size_t r = 1; r <= m.trees.size(); ++r) {
      const double cur = gbdt::training_loss(m, d.x, d.y, r);
      if (cur > prev + 1e-12) ++increases;
      prev = cur;
    }
  }
  const bool ok = datasets >= 100 && mismatches == 0 && worst <= 1e-9 && increases == 0;
  return verdict(ok, std::to_string(datasets) + " stumps (" + std::to_string(splits) + " split), " +
                         std::to_string(mismatches) + " structural mismatches, max leaf error " + fmt(worst, 3) +
                         ", " + std::to_string(increases) + " logloss increases over 20x50 rounds");
}

Outcome treeshap() {
  const auto d = testing::random_dataset(1000, 8, 123);
  gbdt::GbdtParams p;
  p.n_estimators = 80;
  p.max_depth = 6;
  p.subsample = 0.8;
  p.colsample_bytree = 0.8;
  const auto m = gbdt::fit(d.x, d.y, p, 9);
  const auto shap = gbdt::tree_shap_batch(m, d.x);
  const auto margin = m.predict_margin(d.x);
  double local = 0;
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    double s = shap.base;
    for (std::size_t c = 0; c < d.x.cols(); ++c) s += shap.phi(i, c);
    local = std::max(local, std::abs(s - margin[i]));
  }
  Rng rng(44);
  double brute = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto p_feat = static_cast<std::size_t>(rng.between(1, 4));
    const auto dd = testing::random_dataset(200, p_feat, 3000 + static_cast<std::uint64_t>(trial), trial % 2 == 1);
    gbdt::GbdtParams q;
    q.n_estimators = static_cast<int>(rng.between(1, 10));
    q.max_depth = static_cast<int>(rng.between(1, 6));
    q.subsample = trial % 3 ? 1.0 : 0.8;
    const auto mm = gbdt::fit(dd.x, dd.y, q, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 0; i < 25; ++i) {
      const auto fast = gbdt::tree_shap(mm, dd.x.row(i));
      const auto slow = testing::brute_force_shapley(mm, dd.x.row(i));
      for (std::size_t c = 0; c < p_feat; ++c) brute = std::max(brute, std::abs(fast.phi[c] - slow[c]));
    }
  }
  return verdict(local < 1e-6 && brute < 1e-6, "local accuracy max error " + fmt(local, 3) + " on 1000 rows, " +
                                                    "exhaustive Shapley max error " + fmt(brute, 3) +
                                                    " on 40 forests with <= 4 features");
}

Outcome leakage_guard() {
  Rng rng(17);
  const std::size_t n = 300, dim = 24;
  std::vector<std::string> ids;
  std::vector<int> y(n);
  std::vector<float> values;
  scorehead::LabelMap labels;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back("L" + std::to_string(10000 + i));
    y[i] = rng.uniform() < 0.25;
    labels[ids[i]] = y[i];
    for (std::size_t c = 0; c < dim; ++c)
      values.push_back(static_cast<float>((c < 2 && y[i] ? 0.8 : 0.0) + rng.normal()));
  }
  encoder::EmbeddingStore store({encoder::EncoderKind::precomputed, dim, "acceptance"}, ids, values);
  const auto plan = folds::make_folds(ids, y, 5, 3);
  scorehead::TrainingOptions opt;
  opt.max_epochs = 4;

  // Leaky pipeline: one head trained on every id scores every id.
  auto sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  const auto head = scorehead::train_head_fixed(store, labels, scorehead::compact_grid().front(), sorted, 3, opt);
  const auto s = scorehead::score(head, store, ids);
  folds::ScoredColumn leaky;
  for (std::size_t i = 0; i < n; ++i) leaky.entries[ids[i]] = {s[i], plan.fold[i]};
  for (int f = 0; f < 5; ++f) leaky.provenance[f] = head.provenance;
  const auto bad = folds::assert_no_leakage(leaky, plan);
  std::set<std::string> flagged;
  for (const auto& v : bad) flagged.insert(v.id);

  // Leave-fold-out protocol.
  const auto gen = folds::generate_leakage_free_scores(store, labels, plan, 3, scorehead::compact_grid(), opt);
  const auto good = folds::assert_no_leakage(gen.column, plan);
  const bool ok = bad.size() == n && flagged.size() == n && good.empty() && gen.column.entries.size() == n;
  return verdict(ok, "leaky pipeline: " + std::to_string(bad.size()) + " violations for " + std::to_string(n) +
                         " rows; protocol: " + std::to_string(good.size()) + " violations");
}

Outcome stats_oracles() {
  std::vector<std::string> notes;
  bool ok = true;
  Rng rng(8);
  // AUC vs pairwise brute force, with ties.
  const std::size_t n = 1000;
  std::vector<int> y(n);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.3;
    s[i] = std::round((rng.normal() + 0.7 * y[i]) * 20.0) / 20.0;
  }
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  const double auc_err = std::abs(stats::auc(y, s) - wins / pairs);
  ok = ok && auc_err <= 1e-12;
  notes.push_back("AUC err " + fmt(auc_err, 2));

  // {1,2} vs {3,4}: H = 12/(4*5) * (9/2 + 49/2) - 3*5 = 2.4
  const auto kw = stats::kruskal_wallis({{1, 2}, {3, 4}});
  ok = ok && std::abs(kw.h - 2.4) < 1e-12;
  notes.push_back("KW H " + fmt(kw.h));

  const auto chi = stats::chi2_independence({{10, 20}, {20, 10}});
  ok = ok && std::abs(chi.statistic - 20.0 / 3.0) < 1e-9;
  notes.push_back("chi2 " + fmt(chi.statistic, 4));

  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const auto ks_same = stats::ks_two_sample(a, a);
  const auto ks_apart = stats::ks_two_sample(a, b);
  ok = ok && ks_same.d == 0.0 && ks_apart.d == 1.0;
  notes.push_back("KS D " + fmt(ks_same.d) + "/" + fmt(ks_apart.d));

  // DeLong against a paired permutation oracle.
  std::vector<int> yy(n);
  std::vector<double> sa(n), sb(n);
  for (std::size_t i = 0; i < n; ++i) {
    yy[i] = rng.uniform() < 0.3;
    const double shared = rng.normal();
    sa[i] = shared + 0.9 * yy[i] + 0.8 * rng.normal();
    sb[i] = shared + 0.7 * yy[i] + 0.8 * rng.normal();
  }
  const auto dl = stats::delong_test(yy, sa, sb);
  const double observed = std::abs(dl.auc_a - dl.auc_b);
  const int draws = 10000;
  int extreme = 0;
  std::vector<double> pa(n), pb(n);
  for (int dr = 0; dr < draws; ++dr) {
    for (std::size_t i = 0; i < n; ++i) {
      const bool swap = rng.next() >> 63;
      pa[i] = swap ? sb[i] : sa[i];
      pb[i] = swap ? sa[i] : sb[i];
    }
    if (std::abs(stats::auc(yy, pa) - stats::auc(yy, pb)) >= observed - 1e-15) ++extreme;
  }
  const double perm_p = (extreme + 1.0) / (draws + 1.0);
  ok = ok && std::abs(dl.p - perm_p) <= 0.02;
  notes.push_back("DeLong p " + fmt(dl.p, 4) + " vs permutation " + fmt(perm_p, 4));

  // Intercept-only quantile regression against order statistics.
  double qerr = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = static_cast<std::size_t>(rng.between(5, 300));
    std::vector<double> v(m);
    for (auto& x : v) x = rng.normal();
    Matrix ones(m, 1, 1.0);
    for (double tau : stats::kQuantileLevels) {
      const auto fit = stats::quantile_fit(ones, v, tau);
      auto sorted = v;
      std::sort(sorted.begin(), sorted.end());
      const auto k = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(m)));
      const std::vector<double> ref{sorted[std::max<std::size_t>(k, 1) - 1]};
      // Objectives agree even where the minimiser is an interval.
      qerr = std::max(qerr, std::abs(fit.objective - stats::pinball_objective(ones, v, ref, tau)));
      const bool is_order_stat = std::binary_search(sorted.begin(), sorted.end(), fit.beta[0]);
      ok = ok && is_order_stat;
    }
  }
  ok = ok && qerr <= 1e-9;
  notes.push_back("quantile objective err " + fmt(qerr, 2));

  std::string detail;
  for (const auto& x : notes) detail += (detail.empty() ? "" : ", ") + x;
  return verdict(ok, detail);
}

fs::path bundled_corpus() {
  fs::path p = fs::path(TEXTRISK_DATA_DIR) / "synthetic_loans.csv";
  if (fs::exists(p)) return p;
  // Regenerate with the default options when the data directory is absent.
  p = fs::temp_directory_path() / "textrisk_acceptance_synthetic_loans.csv";
  std::ofstream out(p, std::ios::binary);
  pipeline::write_synthetic_csv(out, {});
  return p;
}

json column_map_json() {
  return json::parse(slurp(fs::path(TEXTRISK_DATA_DIR) / "column_map_lending_club.json"));
}

Outcome planted_signal() {
  const auto csv = bundled_corpus();
  double total = 0;
  std::string per_seed;
  int rows = 0, kept = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto dir = fs::temp_directory_path() / ("textrisk_acceptance_planted_" + std::to_string(seed));
    fs::remove_all(dir);
    json j{{"input_csv", csv.string()},
           {"seed", seed},
           {"k", 5},
           {"head_grid", "compact"},
           {"encoder", "hashed"},
           {"column_map", column_map_json()},
           {"gbdt_params",
            {{"scale_pos_weight", 3.0},
             {"eta", 0.1},
             {"subsample", 0.8},
             {"n_estimators", 100},
             {"colsample_bytree", 0.8},
             {"max_depth", 4},
             {"lambda", 1.0},
             {"alpha", 0.5},
             {"gamma", 0.0},
             {"min_child_weight", 1.0}}}};
    const auto cfg = pipeline::RunConfig::from_json(j);
    pipeline::Workspace ws(dir);
    pipeline::cmd_ingest(cfg, ws);
    pipeline::cmd_embed_import(cfg, ws);
    pipeline::cmd_make_folds(cfg, ws);
    pipeline::cmd_gen_score(cfg, ws);
    for (auto v : {pipeline::Variant::with_score, pipeline::Variant::without_score}) {
      pipeline::cmd_tune(cfg, ws, v);
      pipeline::cmd_train(cfg, ws, v);
    }
    pipeline::cmd_evaluate(cfg, ws);
    const auto metrics = json::parse(ws.read("metrics.json"));
    const double with = metrics["variants"]["with-score"]["auc"].get<double>();
    const double without = metrics["variants"]["without-score"]["auc"].get<double>();
    rows = json::parse(ws.read("ingest.json"))["rows_read"].get<int>();
    kept = metrics["variants"]["with-score"]["rows"].get<int>();
    total += with - without;
    per_seed += (per_seed.empty() ? "" : " ") + fmt(with - without, 3);
    ws.save();
    fs::remove_all(dir);
  }
  const double mean = total / 5.0;
  return verdict(rows == 5000 && mean >= 0.05,
                 "n = " + std::to_string(rows) + " (" + std::to_string(kept) + " with a description), mean dAUC " + fmt(mean, 4) + " over 5 seeds [" + per_seed + "]");
}

Outcome real_data() {
  const char* env = std::getenv("TEXTRISK_LENDING_CLUB_CSV");
  if (!env || !fs::exists(env)) return {Outcome::skip, "set TEXTRISK_LENDING_CLUB_CSV to the public export to run"};
  const auto dir = fs::temp_directory_path() / "textrisk_acceptance_lending_club";
  fs::remove_all(dir);
  json j{{"input_csv", std::string(env)}, {"column_map", column_map_json()}};
  const auto cfg = pipeline::RunConfig::from_json(j);
  pipeline::Workspace ws(dir);
  pipeline::cmd_ingest(cfg, ws);
  pipeline::cmd_eda(cfg, ws);
  std::istringstream in(ws.read("records.csv"));
  const auto records = data::read_records_csv(in);
  const auto eda = json::parse(ws.read("eda.json"));
  const double rate = eda["default_rate"].get<double>();
  auto median = [&](std::string_view col) {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(data::quantitative_value(r, col));
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
  };
  double purpose_chi2 = -1;
  for (const auto& row : eda["categorical"])
    if (row["variable"] == "purpose" && row.contains("chi2")) purpose_chi2 = row["chi2"]["statistic"].get<double>();
  const double rev = median("revenue"), amt = median("loan_amnt"), fico = median("fico_n");
  const bool ok = records.size() == 119101 && std::abs(rate - 0.1527) <= 0.0001 + 5e-5 && rev == 62000.0 &&
                  amt == 12000.0 && fico == 697.0 && std::abs(purpose_chi2 - 568.47) <= 0.01 * 568.47;
  return verdict(ok, "rows " + std::to_string(records.size()) + ", default rate " + fmt(100 * rate, 5) +
                         "%, medians revenue " + fmt(rev, 8) + " loan_amnt " + fmt(amt, 8) + " fico_n " + fmt(fico) +
                         ", purpose chi2 " + fmt(purpose_chi2, 6));
}

}  // namespace

int main() {
  std::printf("textrisk acceptance\n");
  criterion("grid-cardinality", 1, grid_cardinality);
  criterion("ga-protocol", 120, ga_protocol);
  criterion("gbdt-oracle", 60, gbdt_oracle);
  criterion("treeshap", 120, treeshap);
  criterion("leakage-guard", 600, leakage_guard);
  criterion("statistics-oracles", 120, stats_oracles);
  criterion("planted-signal", 900, planted_signal);
  criterion("lending-club-optional", 3600, real_data);
  std::printf("%s: %d failing\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
