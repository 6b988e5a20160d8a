#include "textrisk/pipeline/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "textrisk/common/csv.hpp"
#include "textrisk/common/digest.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"
#include "textrisk/common/rng.hpp"
#include "textrisk/folds/folds.hpp"
#include "textrisk/genopt/genopt.hpp"
#include "textrisk/lingfeat/lingfeat.hpp"
#include "textrisk/stats/stats.hpp"

namespace textrisk::pipeline {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(Errc::validation, what + " is not valid JSON: " + e.what());
  }
}

std::vector<data::LoanRecord> load_records(const Workspace& ws) {
  std::istringstream in(ws.read("records.csv"));
  return data::read_records_csv(in);
}

folds::FoldPlan load_folds(const Workspace& ws) {
  const json meta = parse_json(ws.read("folds.json"), "folds.json");
  std::istringstream in(ws.read("folds.csv"));
  return folds::read_fold_csv(in, meta.at("k").get<int>(), meta.at("seed").get<std::uint64_t>());
}

folds::ScoredColumn load_score(const Workspace& ws) {
  std::istringstream in(ws.read("score.csv"));
  auto col = folds::ScoredColumn::read_csv(in);
  col.load_provenance(parse_json(ws.read("score_provenance.json"), "score_provenance.json"));
  return col;
}

LinguisticMap load_linguistic(const Workspace& ws) {
  std::istringstream in(ws.read("linguistic.csv"));
  csv::Reader reader(in);
  reader.next();
  LinguisticMap out;
  while (auto row = reader.next()) {
    double v[4];
    if (row->size() != 5) fail(Errc::validation, "linguistic.csv line " + std::to_string(reader.line()) + " is malformed");
    for (int c = 0; c < 4; ++c)
      if (!parse_double((*row)[static_cast<std::size_t>(c) + 1], v[c]))
        fail(Errc::validation, "linguistic.csv line " + std::to_string(reader.line()) + " is malformed");
    out[(*row)[0]] = {static_cast<std::size_t>(v[0]), v[1], v[2], v[3]};
  }
  return out;
}

encoder::EmbeddingStore load_store(const Workspace& ws) {
  const json meta = parse_json(ws.read("embeddings.json"), "embeddings.json");
  std::istringstream in(ws.read("embeddings.emb"));
  return encoder::load_embeddings(in, encoder::EncoderMeta::from_json(meta));
}

std::vector<std::string> variant_inputs(Variant v) {
  std::vector<std::string> in{"records.csv", "folds.csv", "folds.json"};
  if (needs_score(v)) in.insert(in.end(), {"score.csv", "score_provenance.json"});
  if (needs_linguistic(v)) in.push_back("linguistic.csv");
  return in;
}

VariantData load_variant(const Workspace& ws, const std::vector<data::LoanRecord>& records, Variant v) {
  std::optional<folds::ScoredColumn> score;
  std::optional<LinguisticMap> ling;
  if (needs_score(v)) {
    score = load_score(ws);
    // Re-checked on every load so a hand-edited or foreign score file cannot slip through.
    const auto violations = folds::assert_no_leakage(*score, load_folds(ws));
    if (!violations.empty())
      fail(Errc::leakage, "score.csv fails the leakage check for " + std::to_string(violations.size()) +
                              " ids, first " + violations.front().id + ": " + violations.front().reason);
  }
  if (needs_linguistic(v)) ling = load_linguistic(ws);
  return build_variant(records, v, score ? &*score : nullptr, ling ? &*ling : nullptr);
}

std::string vname(Variant v) { return std::string(variant_name(v)); }

std::uint64_t variant_seed(std::uint64_t seed, Variant v) {
  return Rng::derive_seed(seed, Stream::gbdt, {static_cast<std::uint64_t>(v)});
}

struct Summary {
  double mean = 0, median = 0, sd = 0, min = 0, max = 0;
  std::size_t n = 0;
};

Summary summarize(std::vector<double> v) {
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(s.sd / static_cast<double>(v.size() - 1)) : 0.0;
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : (v[m - 1] + v[m]) / 2.0;
  s.min = v.front();
  s.max = v.back();
  return s;
}

json summary_json(const Summary& s) {
  return {{"n", s.n}, {"mean", s.mean}, {"median", s.median}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}};
}

double quantile_of(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct OofFile {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<int> fold;
  std::vector<double> proba;
};

OofFile load_oof(const Workspace& ws, Variant v) {
  std::istringstream in(ws.read("oof_" + vname(v) + ".csv"));
  csv::Reader reader(in);
  reader.next();
  OofFile o;
  while (auto row = reader.next()) {
    double label = 0, fold = 0, p = 0;
    if (row->size() != 4 || !parse_double((*row)[1], label) || !parse_double((*row)[2], fold) ||
        !parse_double((*row)[3], p))
      fail(Errc::validation, "oof file line " + std::to_string(reader.line()) + " is malformed");
    o.ids.push_back((*row)[0]);
    o.labels.push_back(static_cast<int>(label));
    o.fold.push_back(static_cast<int>(fold));
    o.proba.push_back(p);
  }
  return o;
}

json test_json(const std::string& name, double statistic, double p, std::size_t n, json params) {
  return stats::TestRecord{name, statistic, p, n, std::move(params)}.to_json();
}

}  // namespace

// ---------------------------------------------------------------- config

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.input_csv = j.value("input_csv", c.input_csv);
  c.embeddings = j.value("embeddings", c.embeddings);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.seed = j.value("seed", c.seed);
  c.k = j.value("k", c.k);
  if (j.contains("ga")) {
    const auto& g = j["ga"];
    c.ga.mu = g.value("mu", c.ga.mu);
    c.ga.lambda = g.value("lambda", c.ga.lambda);
    c.ga.generations = g.value("generations", c.ga.generations);
    c.ga.crossover_probability = g.value("crossover_probability", c.ga.crossover_probability);
    c.ga.mutation_probability = g.value("mutation_probability", c.ga.mutation_probability);
  }
  c.head_grid = j.value("head_grid", c.head_grid);
  if (j.contains("head_training")) {
    const auto& h = j["head_training"];
    c.head.batch_size = h.value("batch_size", c.head.batch_size);
    c.head.max_epochs = h.value("max_epochs", c.head.max_epochs);
    c.head.patience = h.value("patience", c.head.patience);
  }
  c.threshold = j.value("threshold", c.threshold);
  if (j.contains("encoder")) c.encoder = encoder::parse_kind(j["encoder"].get<std::string>());
  c.encoder_dim = j.value("encoder_dim", c.encoder_dim);
  if (j.contains("column_map")) c.columns = data::ColumnMap::from_json(j["column_map"]);
  if (j.contains("gbdt_params")) c.gbdt_params = gbdt::GbdtParams::from_json(j["gbdt_params"]);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  if (c.k < 2) fail(Errc::validation, "config: k must be at least 2");
  if (c.head_grid != "full" && c.head_grid != "compact")
    fail(Errc::validation, "config: head_grid must be 'full' or 'compact'");
  if (!(c.threshold > 0 && c.threshold < 1)) fail(Errc::validation, "config: threshold must lie in (0, 1)");
  if (c.gbdt_params) gbdt::validate_table_ranges(*c.gbdt_params);
  return c;
}

json RunConfig::to_json() const {
  json j{{"input_csv", input_csv},
         {"embeddings", embeddings},
         {"seed", seed},
         {"k", k},
         {"ga",
          {{"mu", ga.mu},
           {"lambda", ga.lambda},
           {"generations", ga.generations},
           {"crossover_probability", ga.crossover_probability},
           {"mutation_probability", ga.mutation_probability}}},
         {"head_grid", head_grid},
         {"head_training",
          {{"batch_size", head.batch_size}, {"max_epochs", head.max_epochs}, {"patience", head.patience}}},
         {"threshold", threshold},
         {"encoder", std::string(encoder::kind_name(encoder))},
         {"encoder_dim", encoder_dim},
         {"column_map", columns.source},
         {"bootstrap", bootstrap}};
  if (gbdt_params) j["gbdt_params"] = gbdt_params->to_json();
  return j;
}

std::vector<scorehead::ScoreHeadConfig> RunConfig::grid() const {
  return head_grid == "compact" ? scorehead::compact_grid() : scorehead::enumerate_grid();
}

// ---------------------------------------------------------------- ingest

json cmd_ingest(const RunConfig& cfg, Workspace& ws) {
  if (cfg.input_csv.empty()) fail(Errc::validation, "ingest needs an input CSV (--input)");
  const std::string source = ws.external(cfg.input_csv);
  std::ifstream in(cfg.input_csv, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + cfg.input_csv);
  const auto result = data::ingest_csv(in, cfg.columns);
  if (result.records.empty()) fail(Errc::validation, "no rows survived filtering");

  std::ostringstream rec;
  data::write_records_csv(rec, result.records);
  ws.write("records.csv", rec.str(), "ingest", cfg.seed, {source});
  json summary = result.stats.to_json();
  summary["default_rate"] = static_cast<double>(result.stats.defaults) / static_cast<double>(result.records.size());
  summary["input_sha256"] = sha256_file(cfg.input_csv);
  summary["column_map"] = cfg.columns.source;
  ws.write("ingest.json", dump(summary), "ingest", cfg.seed, {source});
  return summary;
}

// ---------------------------------------------------------------- eda

json cmd_eda(const RunConfig& cfg, Workspace& ws) {
  const auto records = load_records(ws);
  const auto& lexicon = lingfeat::Lexicon::bundled();
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.desc);
  const auto ling = lingfeat::compute_batch(texts, lexicon);

  std::ostringstream lcsv;
  csv::write_row(lcsv, {"id", "word_count", "readability", "polarity", "subjectivity"});
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!ling[i]) continue;
    const auto& f = *ling[i];
    csv::write_row(lcsv, {records[i].id, std::to_string(f.word_count), format_double(f.readability),
                          format_double(f.polarity), format_double(f.subjectivity)});
  }
  ws.write("linguistic.csv", lcsv.str(), "eda", cfg.seed, {"records.csv"});

  std::size_t defaults = 0;
  for (const auto& r : records) defaults += static_cast<std::size_t>(r.label);
  json eda{{"n", records.size()},
           {"defaults", defaults},
           {"default_rate", static_cast<double>(defaults) / static_cast<double>(records.size())},
           {"lexicon_sha256", lexicon.sha256()},
           {"lexicon_entries", lexicon.size()}};

  auto by_class = [&](auto value_of, std::vector<double>& def, std::vector<double>& non) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto v = value_of(i);
      if (!v) continue;
      (records[i].label ? def : non).push_back(*v);
    }
  };
  auto compare = [&](const std::string& name, const std::vector<double>& def, const std::vector<double>& non) {
    json row{{"variable", name}, {"default", summary_json(summarize(def))}, {"non_default", summary_json(summarize(non))}};
    if (!def.empty() && !non.empty()) {
      const auto ks = stats::ks_two_sample(def, non);
      row["ks"] = test_json("ks_two_sample", ks.d, ks.p, def.size() + non.size(), {{"variable", name}});
    }
    return row;
  };

  json quant = json::array();
  for (auto col : data::kQuantitativeColumns) {
    std::vector<double> def, non;
    by_class([&](std::size_t i) { return std::optional<double>(data::quantitative_value(records[i], col)); }, def, non);
    quant.push_back(compare(std::string(col), def, non));
  }
  eda["quantitative"] = quant;

  json cat = json::array();
  for (auto col : data::kCategoricalColumns) {
    std::map<std::string, std::pair<double, double>> counts;  // level -> (non-default, default)
    for (const auto& r : records) {
      auto& c = counts[data::categorical_value(r, col)];
      (r.label ? c.second : c.first) += 1;
    }
    json levels = json::array();
    std::vector<std::vector<double>> table;
    for (const auto& [level, c] : counts) {
      const double total = c.first + c.second;
      levels.push_back({{"level", level},
                        {"count", static_cast<std::size_t>(total)},
                        {"rel_freq", total / static_cast<double>(records.size())},
                        {"default_rate", c.second / total}});
      table.push_back({c.first, c.second});
    }
    json row{{"variable", std::string(col)}, {"levels", levels}};
    if (table.size() >= 2 && defaults > 0 && defaults < records.size()) {
      const auto chi = stats::chi2_independence(table);
      row["chi2"] = test_json("chi2_independence", chi.statistic, chi.p, records.size(),
                              {{"variable", std::string(col)}, {"df", chi.df}});
    }
    cat.push_back(row);
  }
  eda["categorical"] = cat;

  json text = json::array();
  const char* names[] = {"word_count", "readability", "polarity", "subjectivity"};
  for (int c = 0; c < 4; ++c) {
    std::vector<double> def, non;
    by_class(
        [&](std::size_t i) -> std::optional<double> {
          if (!ling[i]) return std::nullopt;
          const auto& f = *ling[i];
          const double v[] = {static_cast<double>(f.word_count), f.readability, f.polarity, f.subjectivity};
          return v[c];
        },
        def, non);
    text.push_back(compare(names[c], def, non));
  }
  eda["textual"] = text;
  eda["linguistic_rows"] = static_cast<std::size_t>(std::count_if(ling.begin(), ling.end(), [](const auto& f) { return f.has_value(); }));
  ws.write("eda.json", dump(eda), "eda", cfg.seed, {"records.csv"});
  return {{"n", records.size()}, {"default_rate", eda["default_rate"]}, {"linguistic_rows", eda["linguistic_rows"]}};
}

// ---------------------------------------------------------------- embed-import

json cmd_embed_import(const RunConfig& cfg, Workspace& ws) {
  const auto records = load_records(ws);
  std::vector<std::string> inputs{"records.csv"};
  std::optional<encoder::EmbeddingStore> store;
  if (cfg.encoder == encoder::EncoderKind::precomputed) {
    if (cfg.embeddings.empty()) fail(Errc::validation, "precomputed encoder needs an embedding file (--embeddings)");
    inputs.push_back(ws.external(cfg.embeddings));
    store = encoder::load_embeddings(std::filesystem::path(cfg.embeddings));
    std::size_t missing = 0;
    std::string example;
    for (const auto& r : records) {
      if (store->contains(r.id)) continue;
      if (!missing) example = r.id;
      ++missing;
    }
    if (missing)
      fail(Errc::unknown_id, std::to_string(missing) + " record ids have no embedding (first: " + example + ")");
  } else {
    std::vector<std::string> ids, texts;
    for (const auto& r : records) {
      ids.push_back(r.id);
      texts.push_back(r.desc);
    }
    store = encoder::hashed_store(ids, texts, cfg.encoder_dim);
  }
  std::ostringstream out;
  encoder::write_embeddings(out, *store);
  ws.write("embeddings.emb", out.str(), "embed-import", cfg.seed, inputs);
  const json meta = store->meta().to_json();
  ws.write("embeddings.json", dump(meta), "embed-import", cfg.seed, inputs);
  return {{"encoder", meta}, {"rows", store->size()}};
}

// ---------------------------------------------------------------- make-folds

json cmd_make_folds(const RunConfig& cfg, Workspace& ws) {
  const auto records = load_records(ws);
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (const auto& r : records) {
    ids.push_back(r.id);
    labels.push_back(r.label);
  }
  const auto plan = folds::make_folds(ids, labels, cfg.k, cfg.seed);
  std::ostringstream out;
  folds::write_fold_csv(out, plan);
  ws.write("folds.csv", out.str(), "make-folds", cfg.seed, {"records.csv"});

  json per_fold = json::array();
  for (int f = 0; f < plan.k; ++f) {
    std::size_t n = 0, pos = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (plan.fold[i] != f) continue;
      ++n;
      pos += static_cast<std::size_t>(labels[i]);
    }
    per_fold.push_back({{"fold", f}, {"rows", n}, {"defaults", pos}});
  }
  const json meta{{"k", plan.k}, {"seed", plan.seed}, {"folds", per_fold}, {"plan_sha256", sha256_hex(out.str())}};
  ws.write("folds.json", dump(meta), "make-folds", cfg.seed, {"records.csv"});
  return meta;
}

// ---------------------------------------------------------------- gen-score

json cmd_gen_score(const RunConfig& cfg, Workspace& ws) {
  const auto records = load_records(ws);
  const auto store = load_store(ws);
  const auto plan = load_folds(ws);
  scorehead::LabelMap labels;
  for (const auto& r : records) labels[r.id] = r.label;

  auto opts = cfg.head;
  opts.seed = cfg.seed;
  const auto grid = cfg.grid();
  const auto gen = folds::generate_leakage_free_scores(store, labels, plan, cfg.seed, grid, opts);
  const std::vector<std::string> inputs{"records.csv", "embeddings.emb", "embeddings.json", "folds.csv", "folds.json"};

  const auto violations = folds::assert_no_leakage(gen.column, plan);
  if (!violations.empty()) {
    json v = json::array();
    for (const auto& x : violations) v.push_back({{"id", x.id}, {"reason", x.reason}});
    ws.write("leakage_violations.json", dump(v), "gen-score", cfg.seed, inputs);
    fail(Errc::leakage, std::to_string(violations.size()) + " leakage violations; see leakage_violations.json");
  }

  std::ostringstream score;
  gen.column.write_csv(score);
  ws.write("score.csv", score.str(), "gen-score", cfg.seed, inputs);
  ws.write("score_provenance.json", dump(gen.column.provenance_json()), "gen-score", cfg.seed, inputs);

  json sel = json::array();
  for (const auto& f : gen.folds) {
    sel.push_back({{"fold", f.fold},
                   {"config", f.config.to_json()},
                   {"test_loss", f.test_loss},
                   {"selected_epochs", f.selected_epochs},
                   {"configs_evaluated", f.configs_evaluated}});
  }
  const json selection{{"grid", cfg.head_grid}, {"grid_size", grid.size()}, {"folds", sel}, {"violations", 0}};
  ws.write("score_selection.json", dump(selection), "gen-score", cfg.seed, inputs);
  return selection;
}

// ---------------------------------------------------------------- tune / train

json cmd_tune(const RunConfig& cfg, Workspace& ws, Variant variant) {
  const auto records = load_records(ws);
  const auto data = load_variant(ws, records, variant);
  const auto plan = load_folds(ws);
  const auto inputs = variant_inputs(variant);
  const std::string name = vname(variant);
  const std::uint64_t seed = Rng::derive_seed(cfg.seed, Stream::genetic, {static_cast<std::uint64_t>(variant)});

  json out{{"variant", name}, {"seed", cfg.seed}, {"columns", data.columns}, {"rows", data.ids.size()}};
  if (cfg.gbdt_params) {
    const auto folds_of_rows = fold_vector(data, plan);
    const auto per_fold = genopt::cv_fold_bacc(*cfg.gbdt_params, data.x, data.labels, folds_of_rows, plan.k,
                                               Rng::derive_seed(seed, Stream::fitness), cfg.threshold);
    double mean = 0;
    for (double v : per_fold) mean += v;
    out["mode"] = "fixed";
    out["params"] = cfg.gbdt_params->to_json();
    out["fitness"] = mean / static_cast<double>(per_fold.size());
    out["fold_bacc"] = per_fold;
  } else {
    const auto result = tune(data, plan, cfg.ga, seed, cfg.threshold);
    out["mode"] = "genetic";
    out["params"] = genopt::to_params(result.best.genome).to_json();
    out["fitness"] = result.best.fitness;
    out["initial_population"] = result.initial_population;
    out["children_total"] = result.children_total;
    out["fitness_evaluations"] = result.fitness_evaluations;
    out["cache_hits"] = result.cache_hits;
    out["settings"] = cfg.to_json()["ga"];
    std::ostringstream hist;
    genopt::write_history_csv(hist, result, genopt::table_genes());
    ws.write("tune_" + name + "_history.csv", hist.str(), "tune", cfg.seed, inputs);
  }
  ws.write("tune_" + name + ".json", dump(out), "tune", cfg.seed, inputs);
  return out;
}

json cmd_train(const RunConfig& cfg, Workspace& ws, Variant variant) {
  const std::string name = vname(variant);
  const json tuned = parse_json(ws.read("tune_" + name + ".json"), "tune file");
  const auto params = gbdt::GbdtParams::from_json(tuned.at("params"));
  const auto records = load_records(ws);
  const auto data = load_variant(ws, records, variant);
  const auto plan = load_folds(ws);
  auto inputs = variant_inputs(variant);
  inputs.push_back("tune_" + name + ".json");

  const std::uint64_t seed = variant_seed(cfg.seed, variant);
  const auto model = gbdt::fit(data.x, data.labels, params, seed, data.columns);
  ws.write("model_" + name + ".json", model.to_json().dump() + "\n", "train", cfg.seed, inputs);

  const auto oof = out_of_fold(data, plan, params, seed, cfg.threshold);
  std::ostringstream o;
  csv::write_row(o, {"id", "label", "fold", "proba"});
  for (std::size_t i = 0; i < data.ids.size(); ++i)
    csv::write_row(o, {data.ids[i], std::to_string(data.labels[i]), std::to_string(oof.fold[i]), format_double(oof.proba[i])});
  ws.write("oof_" + name + ".csv", o.str(), "train", cfg.seed, inputs);
  return {{"variant", name}, {"trees", model.trees.size()}, {"fold_bacc", oof.fold_bacc}};
}

// ---------------------------------------------------------------- evaluate

json cmd_evaluate(const RunConfig& cfg, Workspace& ws) {
  json out{{"threshold", cfg.threshold}, {"seed", cfg.seed}};
  std::vector<std::string> inputs;
  std::map<Variant, OofFile> oofs;
  json variants = json::object();
  for (Variant v : all_variants()) {
    const std::string file = "oof_" + vname(v) + ".csv";
    if (!ws.has(file)) continue;
    inputs.push_back(file);
    auto oof = load_oof(ws, v);
    const auto m = stats::metrics(oof.labels, oof.proba, cfg.threshold);
    json jv = m.to_json();
    int k = 0;
    for (int f : oof.fold) k = std::max(k, f + 1);
    std::vector<double> fold_bacc;
    for (int f = 0; f < k; ++f) {
      std::vector<int> y, pred;
      for (std::size_t i = 0; i < oof.ids.size(); ++i) {
        if (oof.fold[i] != f) continue;
        y.push_back(oof.labels[i]);
        pred.push_back(oof.proba[i] >= cfg.threshold ? 1 : 0);
      }
      fold_bacc.push_back(stats::balanced_accuracy(y, pred));
    }
    double mean = 0;
    for (double b : fold_bacc) mean += b;
    jv["fold_bacc"] = fold_bacc;
    jv["fold_mean_bacc"] = fold_bacc.empty() ? 0.0 : mean / static_cast<double>(fold_bacc.size());
    jv["rows"] = oof.ids.size();
    variants[vname(v)] = jv;
    oofs.emplace(v, std::move(oof));
  }
  if (oofs.empty()) fail(Errc::io, "no out-of-fold predictions found; run train first");
  out["variants"] = variants;

  // Paired DeLong comparisons on the rows both variants scored.
  json comparisons = json::array();
  const std::pair<Variant, Variant> pairs[] = {{Variant::with_score, Variant::without_score},
                                               {Variant::score_only, Variant::categorical},
                                               {Variant::score_only, Variant::linguistic}};
  for (const auto& [a, b] : pairs) {
    if (!oofs.count(a) || !oofs.count(b)) continue;
    const auto& oa = oofs.at(a);
    const auto& ob = oofs.at(b);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ob.ids.size(); ++i) index.emplace(ob.ids[i], i);
    std::vector<int> y;
    std::vector<double> sa, sb;
    for (std::size_t i = 0; i < oa.ids.size(); ++i) {
      auto it = index.find(oa.ids[i]);
      if (it == index.end()) continue;
      y.push_back(oa.labels[i]);
      sa.push_back(oa.proba[i]);
      sb.push_back(ob.proba[it->second]);
    }
    const auto d = stats::delong_test(y, sa, sb);
    comparisons.push_back({{"a", vname(a)},
                           {"b", vname(b)},
                           {"auc_a", d.auc_a},
                           {"auc_b", d.auc_b},
                           {"record", test_json("delong", d.z, d.p, y.size(), {{"a", vname(a)}, {"b", vname(b)}})}});
  }
  out["delong"] = comparisons;

  if (ws.has("score.csv")) {
    inputs.push_back("score.csv");
    inputs.push_back("records.csv");
    const auto score = load_score(ws);
    const auto records = load_records(ws);
    std::vector<int> y;
    std::vector<double> s;
    for (const auto& r : records) {
      auto it = score.entries.find(r.id);
      if (it == score.entries.end()) continue;
      y.push_back(r.label);
      s.push_back(it->second.score);
    }
    out["score_binarization"] = stats::metrics(y, s, cfg.threshold).to_json();
  }
  ws.write("metrics.json", dump(out), "evaluate", cfg.seed, inputs);
  return out;
}

// ---------------------------------------------------------------- explain

json cmd_explain(const RunConfig& cfg, Workspace& ws, Variant variant, const std::optional<std::string>& instance) {
  const std::string name = vname(variant);
  const std::string model_file = "model_" + name + ".json";
  const auto model = gbdt::GbdtModel::from_json(parse_json(ws.read(model_file), model_file));
  const auto records = load_records(ws);
  const auto data = load_variant(ws, records, variant);
  if (data.columns != model.feature_names) fail(Errc::stale_input, "model columns differ from the current feature table");
  auto inputs = variant_inputs(variant);
  inputs.push_back(model_file);

  std::ostringstream imp;
  csv::write_row(imp, {"feature", "share"});
  for (const auto& f : gbdt::feature_importance(model)) csv::write_row(imp, {f.name, format_double(f.share)});
  ws.write("importance_" + name + ".csv", imp.str(), "explain", cfg.seed, inputs);

  const auto shap = gbdt::tree_shap_batch(model, data.x);
  const auto margins = model.predict_margin(data.x);
  const std::size_t p = data.columns.size();

  std::ostringstream sh;
  {
    std::vector<std::string> header{"id"};
    header.insert(header.end(), data.columns.begin(), data.columns.end());
    header.push_back("base");
    header.push_back("margin");
    csv::write_row(sh, header);
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
      std::vector<std::string> row{data.ids[i]};
      for (std::size_t c = 0; c < p; ++c) row.push_back(format_double(shap.phi(i, c)));
      row.push_back(format_double(shap.base));
      row.push_back(format_double(margins[i]));
      csv::write_row(sh, row);
    }
  }
  ws.write("shap_" + name + ".csv", sh.str(), "explain", cfg.seed, inputs);

  // Per-feature SHAP distribution summaries, ordered by mean |phi|.
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t c = 0; c < p; ++c) {
    double s = 0;
    for (std::size_t i = 0; i < data.ids.size(); ++i) s += std::abs(shap.phi(i, c));
    order.emplace_back(s / static_cast<double>(data.ids.size()), c);
  }
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::ostringstream summ;
  csv::write_row(summ, {"feature", "mean_abs_shap", "q05", "q25", "q50", "q75", "q95", "value_shap_corr"});
  for (const auto& [mean_abs, c] : order) {
    std::vector<double> phi(data.ids.size()), val(data.ids.size());
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
      phi[i] = shap.phi(i, c);
      val[i] = data.x(i, c);
    }
    std::string corr;
    try {
      corr = format_double(stats::correlations(val, phi).pearson);
    } catch (const Error&) {
      corr = "";
    }
    csv::write_row(summ, {data.columns[c], format_double(mean_abs), format_double(quantile_of(phi, 0.05)),
                          format_double(quantile_of(phi, 0.25)), format_double(quantile_of(phi, 0.5)),
                          format_double(quantile_of(phi, 0.75)), format_double(quantile_of(phi, 0.95)), corr});
  }
  ws.write("shap_summary_" + name + ".csv", summ.str(), "explain", cfg.seed, inputs);

  json out{{"variant", name}, {"base", shap.base}, {"rows", data.ids.size()}};
  const auto score_it = std::find(data.columns.begin(), data.columns.end(), std::string(kScoreColumn));
  std::optional<std::size_t> score_col;
  if (score_it != data.columns.end()) score_col = static_cast<std::size_t>(score_it - data.columns.begin());
  if (score_col) {
    std::ostringstream dep;
    csv::write_row(dep, {"id", "text_score", "shap"});
    for (std::size_t i = 0; i < data.ids.size(); ++i)
      csv::write_row(dep, {data.ids[i], format_double(data.x(i, *score_col)), format_double(shap.phi(i, *score_col))});
    ws.write("dependence_" + name + ".csv", dep.str(), "explain", cfg.seed, inputs);
  }

  // Waterfall rows: one per feature, ordered by |phi| ascending.
  std::vector<std::size_t> picks;
  if (instance) {
    auto it = std::find(data.ids.begin(), data.ids.end(), *instance);
    if (it == data.ids.end()) fail(Errc::unknown_id, "instance " + *instance + " is not in the feature table");
    picks.push_back(static_cast<std::size_t>(it - data.ids.begin()));
  } else {
    // The correctly classified non-default and default rows where the
    // decisive feature (text score when present) pushes hardest.
    const std::size_t key = score_col.value_or(order.empty() ? 0 : order.front().second);
    std::optional<std::size_t> neg, pos;
    for (std::size_t i = 0; i < data.ids.size(); ++i) {
      const bool predicted = 1.0 / (1.0 + std::exp(-margins[i])) >= cfg.threshold;
      if (data.labels[i] == 0 && !predicted && (!neg || shap.phi(i, key) < shap.phi(*neg, key))) neg = i;
      if (data.labels[i] == 1 && predicted && (!pos || shap.phi(i, key) > shap.phi(*pos, key))) pos = i;
    }
    if (neg) picks.push_back(*neg);
    if (pos) picks.push_back(*pos);
  }
  json waterfalls = json::array();
  for (std::size_t i : picks) {
    std::vector<std::size_t> cols(p);
    for (std::size_t c = 0; c < p; ++c) cols[c] = c;
    std::stable_sort(cols.begin(), cols.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(shap.phi(i, a)) < std::abs(shap.phi(i, b)); });
    std::ostringstream wf;
    csv::write_row(wf, {"feature", "value", "shap"});
    for (std::size_t c : cols)
      csv::write_row(wf, {data.columns[c], format_double(data.x(i, c)), format_double(shap.phi(i, c))});
    const std::string file = "waterfall_" + name + "_" + data.ids[i] + ".csv";
    ws.write(file, wf.str(), "explain", cfg.seed, inputs);
    waterfalls.push_back({{"id", data.ids[i]},
                          {"file", file},
                          {"label", data.labels[i]},
                          {"base", shap.base},
                          {"margin", margins[i]},
                          {"proba", 1.0 / (1.0 + std::exp(-margins[i]))}});
  }
  out["waterfalls"] = waterfalls;
  ws.write("explain_" + name + ".json", dump(out), "explain", cfg.seed, inputs);
  return out;
}

// ---------------------------------------------------------------- report

json cmd_report(const RunConfig& cfg, Workspace& ws) {
  const auto records = load_records(ws);
  const auto score = load_score(ws);
  const auto ling = load_linguistic(ws);
  const json metrics = parse_json(ws.read("metrics.json"), "metrics.json");
  const json eda = parse_json(ws.read("eda.json"), "eda.json");
  std::vector<std::string> inputs{"records.csv", "score.csv", "score_provenance.json", "linguistic.csv",
                                  "metrics.json", "eda.json"};

  std::vector<double> s;
  std::vector<int> y;
  for (const auto& r : records) {
    s.push_back(score.entries.at(r.id).score);
    y.push_back(r.label);
  }

  json report;
  json header{{"command", "report"}, {"seed", cfg.seed}, {"threshold", cfg.threshold}, {"inputs", json::object()}};
  for (const auto& name : inputs) header["inputs"][name] = ws.sha256_of(name);
  if (ws.has("ingest.json")) header["ingest"] = parse_json(ws.read("ingest.json"), "ingest.json");
  report["header"] = header;
  report["eda"] = eda;
  report["metrics"] = metrics;

  // Default and non-default shares per 0.01 score bin.
  std::vector<std::array<std::size_t, 2>> bins(100, {0, 0});
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto b = std::min<std::size_t>(99, static_cast<std::size_t>(std::floor(s[i] * 100.0)));
    bins[b][static_cast<std::size_t>(y[i])]++;
  }
  std::ostringstream bcsv;
  csv::write_row(bcsv, {"bin_low", "bin_high", "count", "default_share", "non_default_share"});
  json jbins = json::array();
  for (std::size_t b = 0; b < 100; ++b) {
    const std::size_t n = bins[b][0] + bins[b][1];
    const double lo = static_cast<double>(b) / 100.0;
    const double hi = static_cast<double>(b + 1) / 100.0;
    json jb{{"bin_low", lo}, {"bin_high", hi}, {"count", n}};
    std::string ds, ns;
    if (n) {
      const double d = static_cast<double>(bins[b][1]) / static_cast<double>(n);
      jb["default_share"] = d;
      jb["non_default_share"] = 1.0 - d;
      ds = format_double(d);
      ns = format_double(1.0 - d);
    } else {
      jb["default_share"] = nullptr;
      jb["non_default_share"] = nullptr;
    }
    jbins.push_back(jb);
    csv::write_row(bcsv, {format_double(lo), format_double(hi), std::to_string(n), ds, ns});
  }
  report["score_bins"] = jbins;
  ws.write("score_bins.csv", bcsv.str(), "report", cfg.seed, inputs);

  json corr = json::array();
  for (auto col : data::kQuantitativeColumns) {
    std::vector<double> x;
    for (const auto& r : records) x.push_back(data::quantitative_value(r, col));
    const auto c = stats::correlations(x, s);
    corr.push_back({{"variable", std::string(col)},
                    {"pearson", test_json("pearson", c.pearson, c.pearson_p, c.n, {{"variable", std::string(col)}})},
                    {"spearman", test_json("spearman", c.spearman, c.spearman_p, c.n, {{"variable", std::string(col)}})}});
  }
  report["score_quantitative_correlations"] = corr;

  json kw = json::array();
  for (auto col : data::kCategoricalColumns) {
    std::map<std::string, std::vector<double>> groups;
    for (std::size_t i = 0; i < records.size(); ++i) groups[data::categorical_value(records[i], col)].push_back(s[i]);
    if (groups.size() < 2) continue;
    std::vector<std::vector<double>> g;
    for (auto& [level, v] : groups) g.push_back(std::move(v));
    const auto r = stats::kruskal_wallis(g);
    kw.push_back(test_json("kruskal_wallis", r.h, r.p, records.size(), {{"variable", std::string(col)}, {"df", r.df}}));
  }
  report["score_categorical_kruskal_wallis"] = kw;

  json lcorr = json::array();
  const char* lnames[] = {"word_count", "readability", "polarity", "subjectivity"};
  for (int c = 0; c < 4; ++c) {
    std::vector<double> x, sv;
    for (std::size_t i = 0; i < records.size(); ++i) {
      auto it = ling.find(records[i].id);
      if (it == ling.end()) continue;
      const auto& f = it->second;
      const double v[] = {static_cast<double>(f.word_count), f.readability, f.polarity, f.subjectivity};
      x.push_back(v[c]);
      sv.push_back(s[i]);
    }
    try {
      const auto r = stats::correlations(x, sv);
      lcorr.push_back({{"variable", lnames[c]},
                       {"pearson", test_json("pearson", r.pearson, r.pearson_p, r.n, {{"variable", lnames[c]}})},
                       {"spearman", test_json("spearman", r.spearman, r.spearman_p, r.n, {{"variable", lnames[c]}})}});
    } catch (const Error& e) {
      lcorr.push_back({{"variable", lnames[c]}, {"error", e.what()}});
    }
  }
  report["score_linguistic_correlations"] = lcorr;

  // Relative BACC change per purpose when the score is added.
  if (ws.has("oof_with-score.csv") && ws.has("oof_without-score.csv")) {
    inputs.push_back("oof_with-score.csv");
    inputs.push_back("oof_without-score.csv");
    const auto with = load_oof(ws, Variant::with_score);
    const auto without = load_oof(ws, Variant::without_score);
    std::unordered_map<std::string, std::string> purpose_of;
    for (const auto& r : records) purpose_of[r.id] = r.purpose;
    std::unordered_map<std::string, double> without_p;
    for (std::size_t i = 0; i < without.ids.size(); ++i) without_p[without.ids[i]] = without.proba[i];
    std::map<std::string, std::array<std::vector<int>, 3>> groups;  // labels, pred with, pred without
    for (std::size_t i = 0; i < with.ids.size(); ++i) {
      auto& g = groups[purpose_of.at(with.ids[i])];
      g[0].push_back(with.labels[i]);
      g[1].push_back(with.proba[i] >= cfg.threshold ? 1 : 0);
      g[2].push_back(without_p.at(with.ids[i]) >= cfg.threshold ? 1 : 0);
    }
    std::ostringstream pcsv;
    csv::write_row(pcsv, {"purpose", "rows", "bacc_without", "bacc_with", "relative_change_pct"});
    json jp = json::array();
    for (const auto& [purpose, g] : groups) {
      const double bw = stats::balanced_accuracy(g[0], g[1]);
      const double bo = stats::balanced_accuracy(g[0], g[2]);
      const double rel = bo > 0 ? 100.0 * (bw - bo) / bo : 0.0;
      jp.push_back({{"purpose", purpose}, {"rows", g[0].size()}, {"bacc_without", bo}, {"bacc_with", bw}, {"relative_change_pct", rel}});
      csv::write_row(pcsv, {purpose, std::to_string(g[0].size()), format_double(bo), format_double(bw), format_double(rel)});
    }
    report["purpose_bacc"] = jp;
    ws.write("purpose_bacc.csv", pcsv.str(), "report", cfg.seed, inputs);
  }

  json importance = json::object();
  for (Variant v : {Variant::with_score, Variant::without_score}) {
    const std::string file = "model_" + vname(v) + ".json";
    if (!ws.has(file)) continue;
    inputs.push_back(file);
    const auto model = gbdt::GbdtModel::from_json(parse_json(ws.read(file), file));
    json arr = json::array();
    for (const auto& f : gbdt::feature_importance(model)) arr.push_back({{"feature", f.name}, {"share", f.share}});
    importance[vname(v)] = arr;
  }
  report["importance"] = importance;

  std::vector<std::string> purposes;
  for (const auto& r : records) purposes.push_back(r.purpose);
  try {
    const auto qr = stats::quantile_regression(s, y, purposes, Rng::derive_seed(cfg.seed, Stream::bootstrap),
                                               cfg.bootstrap);
    report["quantile_regression"] = qr.to_json();
  } catch (const Error& e) {
    if (e.code() != Errc::validation) throw;
    report["quantile_regression"] = {{"error", e.what()}};
  }

  report["header"]["inputs"] = json::object();
  for (const auto& name : inputs) report["header"]["inputs"][name] = ws.sha256_of(name);
  ws.write("report.json", dump(report), "report", cfg.seed, inputs);
  return {{"report", ws.path("report.json").string()}, {"rows", records.size()}};
}

}  // namespace textrisk::pipeline
