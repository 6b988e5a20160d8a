// textrisk command line: one subcommand per pipeline step.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "textrisk/common/error.hpp"
#include "textrisk/pipeline/commands.hpp"
#include "textrisk/pipeline/synth.hpp"

using namespace textrisk;
using namespace textrisk::pipeline;
using nlohmann::json;

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<std::string> encoder;
  std::optional<std::string> input;
  std::optional<std::string> embeddings;
  std::optional<int> k;
  std::optional<std::string> column_map;
};

RunConfig resolve(const Flags& f) {
  json j = json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) fail(Errc::io, "cannot open config " + f.config);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      fail(Errc::validation, "config is not valid JSON: " + std::string(e.what()));
    }
  }
  if (f.seed) j["seed"] = *f.seed;
  if (f.threshold) j["threshold"] = *f.threshold;
  if (f.encoder) j["encoder"] = *f.encoder;
  if (f.input) j["input_csv"] = *f.input;
  if (f.embeddings) j["embeddings"] = *f.embeddings;
  if (f.k) j["k"] = *f.k;
  if (f.column_map) {
    std::ifstream in(*f.column_map);
    if (!in) fail(Errc::io, "cannot open column map " + *f.column_map);
    j["column_map"] = json::parse(in, nullptr, false);
    if (j["column_map"].is_discarded()) fail(Errc::validation, "column map is not valid JSON");
  }
  RunConfig cfg = RunConfig::from_json(j);
  // --out beats the environment, which beats the config file
  if (f.out)
    cfg.out_dir = *f.out;
  else if (const char* env = std::getenv("TEXTRISK_OUT"); env && *env)
    cfg.out_dir = env;
  for (const auto& p : {cfg.input_csv, cfg.embeddings})
    if (!p.empty() && !std::filesystem::exists(p)) fail(Errc::io, "no such file: " + p);
  return cfg;
}

std::vector<Variant> parse_variants(const std::vector<std::string>& names) {
  std::vector<Variant> out;
  for (const auto& n : names) {
    if (n == "all") return all_variants();
    out.push_back(parse_variant(n));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"textrisk: text-derived default scores in a leakage-safe credit scoring pipeline"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--out", flags.out, "output directory (overrides TEXTRISK_OUT and the config)");
  app.add_option("--seed", flags.seed, "master seed");
  app.add_option("--threshold", flags.threshold, "classification threshold");
  app.add_option("--encoder", flags.encoder, "text encoder")->check(CLI::IsMember({"hashed", "precomputed"}));
  app.add_option("--input", flags.input, "raw loan CSV");
  app.add_option("--embeddings", flags.embeddings, "EMB1 embedding file for --encoder precomputed");
  app.add_option("--k", flags.k, "number of folds");
  app.add_option("--column-map", flags.column_map, "JSON map from canonical to source column names");

  std::vector<std::string> variants{"with-score", "without-score"};
  std::string explain_variant = "with-score";
  std::optional<std::string> instance;
  bool score_only = false;
  SynthOptions synth;
  std::string synth_out;

  auto* s_ingest = app.add_subcommand("ingest", "filter and clean the raw CSV");
  auto* s_eda = app.add_subcommand("eda", "descriptive statistics and linguistic features");
  auto* s_embed = app.add_subcommand("embed-import", "encode descriptions or import an EMB1 file");
  auto* s_folds = app.add_subcommand("make-folds", "stratified fold plan");
  auto* s_score = app.add_subcommand("gen-score", "out-of-fold text scores with leakage check");
  auto* s_tune = app.add_subcommand("tune", "hyperparameter search per variant");
  s_tune->add_option("--variant", variants, "variant names or 'all'");
  auto* s_train = app.add_subcommand("train", "final models and out-of-fold predictions");
  s_train->add_option("--variant", variants, "variant names or 'all'");
  auto* s_eval = app.add_subcommand("evaluate", "metric sets and DeLong comparisons");
  s_eval->add_flag("--score-only", score_only, "only the score-only variant");
  auto* s_explain = app.add_subcommand("explain", "importance, SHAP summaries and waterfalls");
  s_explain->add_option("--variant", explain_variant, "variant name");
  s_explain->add_option("--instance", instance, "loan id for a waterfall");
  auto* s_report = app.add_subcommand("report", "assemble the evaluation report");
  auto* s_all = app.add_subcommand("run", "every step in order");
  s_all->add_option("--variant", variants, "variants to tune and train, or 'all'");
  auto* s_synth = app.add_subcommand("synth", "write a synthetic loan CSV");
  s_synth->add_option("--rows", synth.rows);
  s_synth->add_option("--synth-seed", synth.seed);
  s_synth->add_option("--text-effect", synth.text_effect);
  s_synth->add_option("-o,--output", synth_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (s_synth->parsed()) {
      std::ofstream out(synth_out, std::ios::binary);
      if (!out) fail(Errc::io, "cannot write " + synth_out);
      write_synthetic_csv(out, synth);
      std::cout << json{{"rows", synth.rows}, {"seed", synth.seed}, {"output", synth_out}}.dump(2) << "\n";
      return 0;
    }
    const RunConfig cfg = resolve(flags);
    Workspace ws(cfg.out_dir);
    json summary;
    if (s_ingest->parsed()) summary = cmd_ingest(cfg, ws);
    if (s_eda->parsed()) summary = cmd_eda(cfg, ws);
    if (s_embed->parsed()) summary = cmd_embed_import(cfg, ws);
    if (s_folds->parsed()) summary = cmd_make_folds(cfg, ws);
    if (s_score->parsed()) summary = cmd_gen_score(cfg, ws);
    if (s_tune->parsed())
      for (Variant v : parse_variants(variants)) summary[std::string(variant_name(v))] = cmd_tune(cfg, ws, v);
    if (s_train->parsed())
      for (Variant v : parse_variants(variants)) summary[std::string(variant_name(v))] = cmd_train(cfg, ws, v);
    if (s_eval->parsed()) {
      summary = cmd_evaluate(cfg, ws);
      if (score_only) summary = summary["variants"].value(std::string(variant_name(Variant::score_only)), json::object());
    }
    if (s_explain->parsed()) summary = cmd_explain(cfg, ws, parse_variant(explain_variant), instance);
    if (s_report->parsed()) summary = cmd_report(cfg, ws);
    if (s_all->parsed()) {
      cmd_ingest(cfg, ws);
      cmd_eda(cfg, ws);
      cmd_embed_import(cfg, ws);
      cmd_make_folds(cfg, ws);
      cmd_gen_score(cfg, ws);
      for (Variant v : parse_variants(variants)) {
        std::cerr << "tune/train " << variant_name(v) << "\n";
        cmd_tune(cfg, ws, v);
        cmd_train(cfg, ws, v);
      }
      cmd_evaluate(cfg, ws);
      cmd_explain(cfg, ws, Variant::with_score, std::nullopt);
      summary = cmd_report(cfg, ws);
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "error [" << errc_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
