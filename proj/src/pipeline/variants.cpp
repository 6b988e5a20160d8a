#include <algorithm>

#include "textrisk/common/error.hpp"
#include "textrisk/data/feature_table.hpp"
#include "textrisk/pipeline/experiment.hpp"
#include "textrisk/stats/stats.hpp"

namespace textrisk::pipeline {

namespace {

constexpr std::array<std::string_view, 4> kLinguisticColumns{"word_count", "readability", "polarity",
                                                             "subjectivity"};

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::with_score: return "with-score";
    case Variant::without_score: return "without-score";
    case Variant::quantitative: return "quantitative";
    case Variant::categorical: return "categorical";
    case Variant::linguistic: return "linguistic";
    case Variant::score_only: return "score-only";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : all_variants())
    if (variant_name(v) == name) return v;
  fail(Errc::validation, "unknown variant '" + std::string(name) +
                             "' (expected with-score, without-score, quantitative, categorical, linguistic, score-only)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::with_score,  Variant::without_score, Variant::quantitative,
                                      Variant::categorical, Variant::linguistic,    Variant::score_only};
  return v;
}

bool needs_score(Variant v) { return v == Variant::with_score || v == Variant::score_only; }
bool needs_linguistic(Variant v) { return v == Variant::linguistic; }

VariantData build_variant(const std::vector<data::LoanRecord>& records, Variant variant,
                          const folds::ScoredColumn* score, const LinguisticMap* linguistic) {
  if (needs_score(variant) && !score) fail(Errc::validation, "variant needs the text score column");
  if (needs_linguistic(variant) && !linguistic) fail(Errc::validation, "variant needs linguistic features");

  std::vector<data::LoanRecord> rows;
  if (needs_linguistic(variant)) {
    for (const auto& r : records)
      if (linguistic->count(r.id)) rows.push_back(r);
  } else {
    rows = records;
  }

  std::vector<data::ExtraColumn> extra;
  if (needs_linguistic(variant)) {
    for (std::size_t c = 0; c < kLinguisticColumns.size(); ++c) {
      data::ExtraColumn col{std::string(kLinguisticColumns[c]), {}};
      for (const auto& r : rows) {
        const auto& f = linguistic->at(r.id);
        const double values[] = {static_cast<double>(f.word_count), f.readability, f.polarity, f.subjectivity};
        col.values.emplace(r.id, values[c]);
      }
      extra.push_back(std::move(col));
    }
  }
  if (needs_score(variant)) {
    data::ExtraColumn col{std::string(kScoreColumn), {}};
    for (const auto& [id, e] : score->entries) col.values.emplace(id, e.score);
    extra.push_back(std::move(col));
  }
  const data::FeatureTable table = data::build_feature_table(rows, extra);

  std::vector<std::size_t> keep;
  const std::size_t one_hot_begin = table.quantitative_count;
  const std::size_t extra_begin = table.columns.size() - table.extra_count;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    const bool quant = c < one_hot_begin;
    const bool cat = c >= one_hot_begin && c < extra_begin;
    const bool ext = c >= extra_begin;
    bool use = false;
    switch (variant) {
      case Variant::with_score: use = true; break;
      case Variant::without_score: use = quant || cat; break;
      case Variant::quantitative: use = quant; break;
      case Variant::categorical: use = cat; break;
      case Variant::linguistic:
      case Variant::score_only: use = ext; break;
    }
    if (use) keep.push_back(c);
  }

  VariantData out;
  out.variant = variant;
  out.ids = table.ids;
  out.labels = table.labels;
  for (auto c : keep) out.columns.push_back(table.columns[c]);
  out.x = table.values.select_cols(keep);
  return out;
}

std::vector<int> fold_vector(const VariantData& data, const folds::FoldPlan& plan) {
  std::vector<int> out(data.ids.size());
  for (std::size_t i = 0; i < data.ids.size(); ++i) out[i] = plan.fold_of(data.ids[i]);
  return out;
}

OofResult out_of_fold(const VariantData& data, const folds::FoldPlan& plan, const gbdt::GbdtParams& params,
                      std::uint64_t seed, double threshold, Exec exec) {
  OofResult res;
  res.fold = fold_vector(data, plan);
  res.proba.assign(data.ids.size(), 0.0);
  for (int f = 0; f < plan.k; ++f) {
    std::vector<std::size_t> train;
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < data.ids.size(); ++i) (res.fold[i] == f ? valid : train).push_back(i);
    if (train.empty() || valid.empty()) fail(Errc::empty_split, "fold " + std::to_string(f) + " is empty");
    std::vector<int> ytr;
    std::vector<int> yva;
    for (auto i : train) ytr.push_back(data.labels[i]);
    for (auto i : valid) yva.push_back(data.labels[i]);
    const auto model = gbdt::fit(data.x.select_rows(train), ytr, params, seed, data.columns, {exec, false});
    const auto p = model.predict_proba(data.x.select_rows(valid), exec);
    std::vector<int> pred(p.size());
    for (std::size_t i = 0; i < valid.size(); ++i) {
      res.proba[valid[i]] = p[i];
      pred[i] = p[i] >= threshold ? 1 : 0;
    }
    res.fold_bacc.push_back(stats::balanced_accuracy(yva, pred));
  }
  return res;
}

genopt::EvolveResult tune(const VariantData& data, const folds::FoldPlan& plan, const TuneSettings& s,
                          std::uint64_t seed, double threshold, Exec exec) {
  const auto fold_of_row = fold_vector(data, plan);
  const std::uint64_t fit_seed = Rng::derive_seed(seed, Stream::fitness);
  genopt::FitnessFn fitness = [&](const genopt::Genome& g) {
    return genopt::cv_fitness(genopt::to_params(g), data.x, data.labels, fold_of_row, plan.k, fit_seed, threshold);
  };
  genopt::EvolveOptions o;
  o.mu = s.mu;
  o.lambda = s.lambda;
  o.generations = s.generations;
  o.crossover_probability = s.crossover_probability;
  o.mutation_probability = s.mutation_probability;
  o.seed = seed;
  o.exec = exec;
  return genopt::evolve(fitness, genopt::table_genes(), o);
}

}  // namespace textrisk::pipeline
