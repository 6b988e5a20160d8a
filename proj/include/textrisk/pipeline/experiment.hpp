#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "textrisk/common/exec.hpp"
#include "textrisk/common/matrix.hpp"
#include "textrisk/data/loan.hpp"
#include "textrisk/folds/folds.hpp"
#include "textrisk/gbdt/gbdt.hpp"
#include "textrisk/genopt/genopt.hpp"
#include "textrisk/lingfeat/lingfeat.hpp"

namespace textrisk::pipeline {

enum class Variant { with_score, without_score, quantitative, categorical, linguistic, score_only };

inline constexpr std::string_view kScoreColumn = "text_score";

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();
bool needs_score(Variant v);
bool needs_linguistic(Variant v);

// Design matrix for one variant, rows in `records` order.
struct VariantData {
  Variant variant = Variant::without_score;
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Matrix x;
  std::vector<int> labels;
};

using LinguisticMap = std::unordered_map<std::string, lingfeat::LinguisticFeatures>;

// Rows without linguistic features are dropped only for the linguistic variant.
VariantData build_variant(const std::vector<data::LoanRecord>& records, Variant variant,
                          const folds::ScoredColumn* score = nullptr, const LinguisticMap* linguistic = nullptr);

// Fold index per row of `data`, looked up in the plan.
std::vector<int> fold_vector(const VariantData& data, const folds::FoldPlan& plan);

struct OofResult {
  std::vector<double> proba;  // out-of-fold probability per row
  std::vector<int> fold;
  std::vector<double> fold_bacc;
};

// Each fold's rows are predicted by a model fitted on the other folds.
OofResult out_of_fold(const VariantData& data, const folds::FoldPlan& plan, const gbdt::GbdtParams& params,
                      std::uint64_t seed, double threshold = 0.5, Exec exec = Exec::parallel);

struct TuneSettings {
  std::size_t mu = 150;
  std::size_t lambda = 150;
  int generations = 20;
  double crossover_probability = 0.8;
  double mutation_probability = 0.2;
};

// Genetic search of the boosting hyperparameters on mean fold BACC.
genopt::EvolveResult tune(const VariantData& data, const folds::FoldPlan& plan, const TuneSettings& settings,
                          std::uint64_t seed, double threshold = 0.5, Exec exec = Exec::parallel);

}  // namespace textrisk::pipeline
