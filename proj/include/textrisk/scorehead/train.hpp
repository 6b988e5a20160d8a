#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "textrisk/common/exec.hpp"
#include "textrisk/common/rng.hpp"
#include "textrisk/encoder/encoder.hpp"
#include "textrisk/scorehead/config.hpp"
#include "textrisk/scorehead/network.hpp"

namespace textrisk::scorehead {

using LabelMap = std::unordered_map<std::string, int>;

struct TrainingOptions {
  std::size_t batch_size = 64;
  int max_epochs = 25;
  int patience = 3;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
};

struct TrainedScoreHead {
  Network network;
  int selected_epochs = 0;
  double validation_loss = 0.0;            // best validation loss; 0 for fixed-epoch refits
  std::vector<double> epoch_losses;        // validation loss per completed epoch
  std::vector<std::string> provenance;     // sorted ids seen during training
  std::uint64_t seed = 0;

  const ScoreHeadConfig& config() const noexcept { return network.config(); }
  double predict(std::span<const float> encoding) const;

  nlohmann::json to_json() const;
  static TrainedScoreHead from_json(const nlohmann::json& j);
};

// Mini-batch Adam on balanced weighted BCE. Tracks validation loss per epoch,
// stops after `patience` epochs without improvement or at max_epochs, and
// returns the weights of the best-validation epoch.
// Errors: Errc::empty_split, Errc::degenerate_class (one class in train),
// Errc::validation (overlapping split), Errc::numeric (non-finite loss).
TrainedScoreHead train_head(const encoder::EmbeddingStore& store, const LabelMap& labels,
                            const ScoreHeadConfig& config, std::span<const std::string> train_ids,
                            std::span<const std::string> val_ids, const TrainingOptions& options);

// Trains for exactly `epochs` epochs without a holdout.
TrainedScoreHead train_head_fixed(const encoder::EmbeddingStore& store, const LabelMap& labels,
                                  const ScoreHeadConfig& config, std::span<const std::string> train_ids,
                                  int epochs, const TrainingOptions& options);

struct ConfigOutcome {
  ScoreHeadConfig config;
  double test_loss = 0.0;
  int selected_epochs = 0;
};

struct Selection {
  ScoreHeadConfig config;
  TrainedScoreHead head;  // winner refit on every fold-train id
  std::vector<ConfigOutcome> outcomes;
  std::vector<std::string> subset_train;
  std::vector<std::string> subset_test;
};

// Class-stratified split: round(fraction * n_c) ids of each class go to the
// first part after a seeded shuffle. Both parts keep every class that has
// at least two members.
std::pair<std::vector<std::string>, std::vector<std::string>> stratified_split(
    std::span<const std::string> ids, const LabelMap& labels, double first_fraction, Rng& rng);

// Stratified 70/30 split of the fold-train ids, every grid config trained on
// the 70% and scored by weighted BCE on the 30%, lowest loss wins (grid order
// breaks ties), then the winner is refit on all fold-train ids for its
// selected epoch count. Grid configs train concurrently under Exec::parallel.
Selection select_architecture(const encoder::EmbeddingStore& store, const LabelMap& labels,
                              std::span<const std::string> fold_train_ids, std::uint64_t seed,
                              const std::vector<ScoreHeadConfig>& grid, const TrainingOptions& options,
                              Exec exec = Exec::parallel);

// Deterministic inference; outputs clamped into the open interval (0, 1).
std::vector<double> score(const TrainedScoreHead& head, const encoder::EmbeddingStore& store,
                          std::span<const std::string> ids);

}  // namespace textrisk::scorehead
