#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "textrisk/data/ingest.hpp"
#include "textrisk/encoder/encoder.hpp"
#include "textrisk/gbdt/gbdt.hpp"
#include "textrisk/pipeline/experiment.hpp"
#include "textrisk/pipeline/workspace.hpp"
#include "textrisk/scorehead/train.hpp"

namespace textrisk::pipeline {

// Everything a run needs; loaded from JSON (schemas/run_config.schema.json)
// and then overridden by command-line flags.
struct RunConfig {
  std::string input_csv;
  std::string embeddings;  // EMB1 file for the precomputed encoder
  std::string out_dir = "textrisk_out";
  std::uint64_t seed = 42;
  int k = 5;
  TuneSettings ga;
  std::string head_grid = "full";  // "full" (126 configs) or "compact"
  scorehead::TrainingOptions head;
  double threshold = 0.5;
  encoder::EncoderKind encoder = encoder::EncoderKind::hashed;
  std::size_t encoder_dim = encoder::kDefaultDim;
  data::ColumnMap columns;
  // When set, tune records these parameters instead of running the search.
  std::optional<gbdt::GbdtParams> gbdt_params;
  int bootstrap = 1000;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::vector<scorehead::ScoreHeadConfig> grid() const;
};

// Each command reads its inputs through the workspace manifest, writes its
// artifacts and returns a short JSON summary for the console.
nlohmann::json cmd_ingest(const RunConfig& cfg, Workspace& ws);
nlohmann::json cmd_eda(const RunConfig& cfg, Workspace& ws);
nlohmann::json cmd_embed_import(const RunConfig& cfg, Workspace& ws);
nlohmann::json cmd_make_folds(const RunConfig& cfg, Workspace& ws);
// Throws Errc::leakage after writing leakage_violations.json if the guard fails.
nlohmann::json cmd_gen_score(const RunConfig& cfg, Workspace& ws);
nlohmann::json cmd_tune(const RunConfig& cfg, Workspace& ws, Variant variant);
nlohmann::json cmd_train(const RunConfig& cfg, Workspace& ws, Variant variant);
nlohmann::json cmd_evaluate(const RunConfig& cfg, Workspace& ws);
nlohmann::json cmd_explain(const RunConfig& cfg, Workspace& ws, Variant variant,
                           const std::optional<std::string>& instance);
nlohmann::json cmd_report(const RunConfig& cfg, Workspace& ws);

}  // namespace textrisk::pipeline
