#include "textrisk/genopt/genopt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <unordered_map>

#include "textrisk/common/csv.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"
#include "textrisk/stats/stats.hpp"

namespace textrisk::genopt {

const std::vector<GeneSpec>& table_genes() {
  static const std::vector<GeneSpec> genes{
      {"scale_pos_weight", 0.1, 10, GeneKind::real},  {"eta", 0.001, 0.5, GeneKind::real},
      {"subsample", 0.7, 1, GeneKind::real},          {"n_estimators", 2, 500, GeneKind::integer},
      {"colsample_bytree", 0.3, 1, GeneKind::real},   {"max_depth", 2, 12, GeneKind::integer},
      {"lambda", 0.5, 10, GeneKind::real},            {"alpha", 0.5, 10, GeneKind::real},
      {"gamma", 0, 10, GeneKind::real},               {"min_child_weight", 0, 10, GeneKind::real},
  };
  return genes;
}

gbdt::GbdtParams to_params(const Genome& g) {
  if (g.size() != 10) fail(Errc::validation, "genome must have 10 genes");
  gbdt::GbdtParams p;
  p.scale_pos_weight = g[0];
  p.eta = g[1];
  p.subsample = g[2];
  p.n_estimators = static_cast<int>(std::lround(g[3]));
  p.colsample_bytree = g[4];
  p.max_depth = static_cast<int>(std::lround(g[5]));
  p.lambda = g[6];
  p.alpha = g[7];
  p.gamma = g[8];
  p.min_child_weight = g[9];
  return p;
}

Genome from_params(const gbdt::GbdtParams& p) {
  return {p.scale_pos_weight, p.eta,    p.subsample, static_cast<double>(p.n_estimators), p.colsample_bytree,
          static_cast<double>(p.max_depth), p.lambda, p.alpha,     p.gamma,                              p.min_child_weight};
}

nlohmann::json genome_json(const Genome& g, std::span<const GeneSpec> spec) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < g.size() && i < spec.size(); ++i) {
    if (spec[i].kind == GeneKind::integer) {
      j[spec[i].name] = std::llround(g[i]);
    } else {
      j[spec[i].name] = g[i];
    }
  }
  return j;
}

std::string canonical_key(const Genome& g) {
  std::string key;
  char buf[32];
  for (double v : g) {
    std::snprintf(buf, sizeof buf, "%.12g;", v);
    key += buf;
  }
  return key;
}

double random_gene(const GeneSpec& gene, Rng& rng) {
  if (gene.kind == GeneKind::integer)
    return static_cast<double>(rng.between(static_cast<std::int64_t>(gene.lo), static_cast<std::int64_t>(gene.hi)));
  return rng.uniform(gene.lo, gene.hi);
}

Genome random_genome(std::span<const GeneSpec> spec, Rng& rng) {
  Genome g(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) g[i] = random_gene(spec[i], rng);
  return g;
}

bool within_bounds(const Genome& g, std::span<const GeneSpec> spec) {
  if (g.size() != spec.size()) return false;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= spec[i].lo && g[i] <= spec[i].hi)) return false;
    if (spec[i].kind == GeneKind::integer && g[i] != std::round(g[i])) return false;
  }
  return true;
}

std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, std::size_t first, std::size_t last) {
  if (a.size() != b.size()) fail(Errc::validation, "parents differ in genome length");
  if (first > last || last > a.size()) fail(Errc::validation, "crossover cut points out of range");
  Genome ca = a;
  Genome cb = b;
  for (std::size_t i = first; i < last; ++i) std::swap(ca[i], cb[i]);
  return {std::move(ca), std::move(cb)};
}

std::pair<Genome, Genome> crossover_two_point(const Genome& a, const Genome& b, Rng& rng, double probability) {
  if (a.size() != b.size()) fail(Errc::validation, "parents differ in genome length");
  if (a.size() < 2 || !rng.bernoulli(probability)) return {a, b};
  // Two distinct cut points in 1..size, as in the usual two-point operator.
  std::size_t c1 = 1 + rng.below(a.size());
  std::size_t c2 = 1 + rng.below(a.size() - 1);
  if (c2 >= c1) {
    ++c2;
  } else {
    std::swap(c1, c2);
  }
  return crossover_at(a, b, c1, std::min(c2, a.size()));
}

void mutate_random_reset(Genome& g, std::span<const GeneSpec> spec, Rng& rng, double probability) {
  if (g.size() != spec.size()) fail(Errc::validation, "genome does not match the gene specification");
  for (std::size_t i = 0; i < g.size(); ++i)
    if (rng.bernoulli(probability)) g[i] = random_gene(spec[i], rng);
}

std::size_t tournament(std::span<const Individual> population, Rng& rng, std::size_t size) {
  if (population.empty() || size == 0) fail(Errc::validation, "tournament needs a population and a size");
  std::vector<std::size_t> contestants(size);
  for (auto& c : contestants) c = rng.below(population.size());
  double best = -std::numeric_limits<double>::infinity();
  for (auto c : contestants) best = std::max(best, population[c].fitness);
  std::vector<std::size_t> tied;
  for (auto c : contestants)
    if (population[c].fitness == best) tied.push_back(c);
  return tied.size() == 1 ? tied[0] : tied[rng.below(tied.size())];
}

namespace {

// Evaluates every genome not yet cached, in parallel, and returns fitness in
// input order.
std::vector<double> evaluate(const FitnessFn& fitness, const std::vector<Genome>& genomes,
                             std::unordered_map<std::string, double>& cache, std::span<const GeneSpec> spec,
                             Exec exec, std::size_t& evaluations, std::size_t& hits) {
  std::vector<std::string> keys(genomes.size());
  std::vector<std::size_t> todo;
  std::unordered_map<std::string, std::size_t> pending;
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    keys[i] = canonical_key(genomes[i]);
    if (cache.count(keys[i]) || pending.count(keys[i])) {
      ++hits;
      continue;
    }
    pending.emplace(keys[i], i);
    todo.push_back(i);
  }
  std::vector<double> values(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());
  auto run = [&](std::ptrdiff_t t) {
    const auto ti = static_cast<std::size_t>(t);
    try {
      values[ti] = fitness(genomes[todo[ti]]);
      if (!std::isfinite(values[ti])) fail(Errc::numeric, "fitness is not finite");
    } catch (...) {
      errors[ti] = std::current_exception();
    }
  };
  const auto nt = static_cast<std::ptrdiff_t>(todo.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t t = 0; t < nt; ++t) run(t);
  } else {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t t = 0; t < nt; ++t) run(t);
  }
  for (std::size_t t = 0; t < todo.size(); ++t) {
    if (!errors[t]) continue;
    const std::string genome = genome_json(genomes[todo[t]], spec).dump();
    try {
      std::rethrow_exception(errors[t]);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (genome " + genome + ")");
    } catch (const std::exception& e) {
      throw Error(Errc::numeric, std::string(e.what()) + " (genome " + genome + ")");
    }
  }
  evaluations += todo.size();
  for (std::size_t t = 0; t < todo.size(); ++t) cache.emplace(keys[todo[t]], values[t]);
  std::vector<double> out(genomes.size());
  for (std::size_t i = 0; i < genomes.size(); ++i) out[i] = cache.at(keys[i]);
  return out;
}

GenerationRecord summarize(int generation, const std::vector<Individual>& population) {
  GenerationRecord rec;
  rec.generation = generation;
  double sum = 0.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < population.size(); ++i) {
    sum += population[i].fitness;
    if (population[i].fitness > population[best].fitness) best = i;
  }
  rec.best_fitness = population[best].fitness;
  rec.best_genome = population[best].genome;
  rec.mean_fitness = sum / static_cast<double>(population.size());
  rec.population = population.size();
  return rec;
}

}  // namespace

EvolveResult evolve(const FitnessFn& fitness, std::span<const GeneSpec> spec, const EvolveOptions& o) {
  if (o.mu < 2 || o.lambda < 2) fail(Errc::validation, "mu and lambda must be at least 2");
  if (o.generations < 0) fail(Errc::validation, "generations must be non-negative");
  if (spec.empty()) fail(Errc::validation, "empty gene specification");

  EvolveResult result;
  std::unordered_map<std::string, double> cache;

  std::vector<Genome> genomes(o.mu);
  for (std::size_t i = 0; i < o.mu; ++i) {
    Rng rng = Rng::stream(o.seed, Stream::genetic, {0, i});
    genomes[i] = random_genome(spec, rng);
  }
  std::size_t evals = 0;
  auto values = evaluate(fitness, genomes, cache, spec, o.exec, evals, result.cache_hits);
  std::vector<Individual> population(o.mu);
  for (std::size_t i = 0; i < o.mu; ++i) population[i] = {std::move(genomes[i]), values[i]};
  result.initial_population = o.mu;
  result.fitness_evaluations = evals;
  auto rec0 = summarize(0, population);
  rec0.evaluations = evals;
  result.history.push_back(rec0);

  const std::size_t pairs = (o.lambda + 1) / 2;
  for (int gen = 1; gen <= o.generations; ++gen) {
    std::vector<Genome> children;
    children.reserve(2 * pairs);
    for (std::size_t k = 0; k < pairs; ++k) {
      Rng rng = Rng::stream(o.seed, Stream::genetic, {static_cast<std::uint64_t>(gen), k});
      const auto& pa = population[tournament(population, rng, o.tournament_size)].genome;
      const auto& pb = population[tournament(population, rng, o.tournament_size)].genome;
      auto [ca, cb] = crossover_two_point(pa, pb, rng, o.crossover_probability);
      mutate_random_reset(ca, spec, rng, o.mutation_probability);
      mutate_random_reset(cb, spec, rng, o.mutation_probability);
      children.push_back(std::move(ca));
      if (children.size() < o.lambda) children.push_back(std::move(cb));
    }
    evals = 0;
    values = evaluate(fitness, children, cache, spec, o.exec, evals, result.cache_hits);
    result.fitness_evaluations += evals;
    result.children_total += children.size();

    std::vector<Individual> pool = std::move(population);
    for (std::size_t i = 0; i < children.size(); ++i) pool.push_back({std::move(children[i]), values[i]});
    std::stable_sort(pool.begin(), pool.end(), [](const Individual& a, const Individual& b) { return a.fitness > b.fitness; });
    pool.resize(o.mu);
    population = std::move(pool);

    auto rec = summarize(gen, population);
    rec.children = values.size();
    rec.evaluations = evals;
    result.history.push_back(std::move(rec));
  }
  result.best = population.front();
  return result;
}

void write_history_csv(std::ostream& out, const EvolveResult& result, std::span<const GeneSpec> spec) {
  csv::write_row(out, {"generation", "best_fitness", "mean_fitness", "best_genome_json"});
  for (const auto& rec : result.history) {
    csv::write_row(out, {std::to_string(rec.generation), format_double(rec.best_fitness), format_double(rec.mean_fitness),
                         genome_json(rec.best_genome, spec).dump()});
  }
}

std::vector<double> cv_fold_bacc(const gbdt::GbdtParams& params, const Matrix& x, std::span<const int> y,
                                 std::span<const int> fold_of_row, int k, std::uint64_t seed, double threshold) {
  if (fold_of_row.size() != x.rows() || y.size() != x.rows())
    fail(Errc::length_mismatch, "rows, labels and fold assignment differ in length");
  std::vector<double> out;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < x.rows(); ++i) (fold_of_row[i] == f ? valid : train).push_back(i);
    if (train.empty() || valid.empty()) fail(Errc::empty_split, "fold " + std::to_string(f) + " is empty");
    std::vector<int> ytr(train.size());
    std::vector<int> yva(valid.size());
    for (std::size_t i = 0; i < train.size(); ++i) ytr[i] = y[train[i]];
    for (std::size_t i = 0; i < valid.size(); ++i) yva[i] = y[valid[i]];
    const auto model = gbdt::fit(x.select_rows(train), ytr, params, seed, {}, {Exec::serial, false});
    const auto proba = model.predict_proba(x.select_rows(valid), Exec::serial);
    std::vector<int> pred(proba.size());
    for (std::size_t i = 0; i < proba.size(); ++i) pred[i] = proba[i] >= threshold ? 1 : 0;
    out.push_back(stats::balanced_accuracy(yva, pred));
  }
  return out;
}

double cv_fitness(const gbdt::GbdtParams& params, const Matrix& x, std::span<const int> y,
                  std::span<const int> fold_of_row, int k, std::uint64_t seed, double threshold) {
  const auto per_fold = cv_fold_bacc(params, x, y, fold_of_row, k, seed, threshold);
  double sum = 0.0;
  for (double v : per_fold) sum += v;
  return sum / static_cast<double>(per_fold.size());
}

}  // namespace textrisk::genopt
