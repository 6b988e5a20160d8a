#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "textrisk/common/exec.hpp"
#include "textrisk/common/matrix.hpp"
#include "textrisk/common/rng.hpp"
#include "textrisk/gbdt/gbdt.hpp"

namespace textrisk::genopt {

enum class GeneKind { real, integer };

struct GeneSpec {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  GeneKind kind = GeneKind::real;
};

using Genome = std::vector<double>;

// The ten boosting hyperparameters in fixed gene order with their search ranges.
const std::vector<GeneSpec>& table_genes();

gbdt::GbdtParams to_params(const Genome& g);
Genome from_params(const gbdt::GbdtParams& p);
nlohmann::json genome_json(const Genome& g, std::span<const GeneSpec> spec);
// Reals rounded to 12 significant digits; the fitness cache key.
std::string canonical_key(const Genome& g);

Genome random_genome(std::span<const GeneSpec> spec, Rng& rng);
double random_gene(const GeneSpec& gene, Rng& rng);
bool within_bounds(const Genome& g, std::span<const GeneSpec> spec);

// With probability `probability` swaps the segment between two random cut
// points; otherwise returns copies of the parents.
std::pair<Genome, Genome> crossover_two_point(const Genome& a, const Genome& b, Rng& rng, double probability = 0.8);
// Swaps genes [first, last) between the parents.
std::pair<Genome, Genome> crossover_at(const Genome& a, const Genome& b, std::size_t first, std::size_t last);

void mutate_random_reset(Genome& g, std::span<const GeneSpec> spec, Rng& rng, double probability = 0.2);

struct Individual {
  Genome genome;
  double fitness = 0.0;
};

// Draws `size` contestants with replacement; the fittest wins, ties broken
// uniformly at random. Returns the winner's index.
std::size_t tournament(std::span<const Individual> population, Rng& rng, std::size_t size = 2);

struct EvolveOptions {
  std::size_t mu = 150;
  std::size_t lambda = 150;
  int generations = 20;
  double crossover_probability = 0.8;
  double mutation_probability = 0.2;
  std::size_t tournament_size = 2;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
};

struct GenerationRecord {
  int generation = 0;  // 0 is the initial population
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  Genome best_genome;
  std::size_t children = 0;
  std::size_t population = 0;  // survivors after selection
  std::size_t evaluations = 0;  // fitness calls after cache lookup
};

struct EvolveResult {
  Individual best;
  std::vector<GenerationRecord> history;
  std::size_t initial_population = 0;
  std::size_t children_total = 0;
  std::size_t fitness_evaluations = 0;
  std::size_t cache_hits = 0;
};

// Must be thread safe; called concurrently on distinct genomes.
using FitnessFn = std::function<double(const Genome&)>;

EvolveResult evolve(const FitnessFn& fitness, std::span<const GeneSpec> spec, const EvolveOptions& options);

void write_history_csv(std::ostream& out, const EvolveResult& result, std::span<const GeneSpec> spec);

// Mean validation BACC over the folds. fold_of_row[i] in [0, k) assigns row i.
// Each fold is fitted with the same boosting seed so the value depends only
// on the genome.
double cv_fitness(const gbdt::GbdtParams& params, const Matrix& x, std::span<const int> y,
                  std::span<const int> fold_of_row, int k, std::uint64_t seed, double threshold = 0.5);

// Per-fold BACC values behind cv_fitness.
std::vector<double> cv_fold_bacc(const gbdt::GbdtParams& params, const Matrix& x, std::span<const int> y,
                                 std::span<const int> fold_of_row, int k, std::uint64_t seed, double threshold = 0.5);

}  // namespace textrisk::genopt
