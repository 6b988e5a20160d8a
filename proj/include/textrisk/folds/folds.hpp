#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "textrisk/common/exec.hpp"
#include "textrisk/encoder/encoder.hpp"
#include "textrisk/scorehead/train.hpp"

namespace textrisk::folds {

// Seeded stratified k-fold assignment, in input id order.
struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::vector<std::string> ids;
  std::vector<int> fold;

  int fold_of(const std::string& id) const;
  std::vector<std::string> ids_in(int f) const;
  std::vector<std::string> ids_not_in(int f) const;
  // Row positions (into ids) for a fold's validation or training side.
  std::vector<std::size_t> rows_in(int f) const;
  std::vector<std::size_t> rows_not_in(int f) const;

 private:
  mutable std::unordered_map<std::string, int> index_;
};

// Shuffles each class with Rng::stream(seed, Stream::folds, {class}) and deals
// it round-robin; the negative class continues where the positive class
// stopped so fold totals also stay within one row of each other.
// Throws Errc::validation for k < 2, Errc::insufficient_class when a class
// has fewer than k members.
FoldPlan make_folds(std::span<const std::string> ids, std::span<const int> labels, int k, std::uint64_t seed);

// CSV "id,fold" (plus a k/seed comment-free sidecar is kept by the caller).
void write_fold_csv(std::ostream& out, const FoldPlan& plan);
FoldPlan read_fold_csv(std::istream& in, int k, std::uint64_t seed);

struct ScoredEntry {
  double score = 0.0;
  int producing_fold = 0;
};

// Out-of-fold text scores plus, per producing model, the ids it trained on.
struct ScoredColumn {
  std::map<std::string, ScoredEntry> entries;
  std::map<int, std::vector<std::string>> provenance;  // fold -> sorted training ids

  void write_csv(std::ostream& out) const;  // id,score,producing_fold
  static ScoredColumn read_csv(std::istream& in);
  nlohmann::json provenance_json() const;
  void load_provenance(const nlohmann::json& j);
};

struct FoldSelectionSummary {
  int fold = 0;
  scorehead::ScoreHeadConfig config;
  double test_loss = 0.0;
  int selected_epochs = 0;
  std::size_t configs_evaluated = 0;
};

struct ScoreGeneration {
  ScoredColumn column;
  std::vector<FoldSelectionSummary> folds;
  std::vector<scorehead::TrainedScoreHead> heads;
};

// For each fold f: architecture selection on the ids outside f, then the refit
// winner scores exactly the ids in f. Errors carry the fold index.
ScoreGeneration generate_leakage_free_scores(const encoder::EmbeddingStore& store,
                                             const scorehead::LabelMap& labels, const FoldPlan& plan,
                                             std::uint64_t seed, const std::vector<scorehead::ScoreHeadConfig>& grid,
                                             const scorehead::TrainingOptions& options, Exec exec = Exec::parallel);

struct Violation {
  std::string id;
  std::string reason;
};

// One violation per offending id: scored by a model other than its own fold's
// or by a model whose training set contains it. Throws Errc::validation when
// the column and plan cover different ids.
std::vector<Violation> assert_no_leakage(const ScoredColumn& column, const FoldPlan& plan);

}  // namespace textrisk::folds
