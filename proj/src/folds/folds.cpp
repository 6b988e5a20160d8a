#include "textrisk/folds/folds.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "textrisk/common/csv.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"
#include "textrisk/common/rng.hpp"

namespace textrisk::folds {

int FoldPlan::fold_of(const std::string& id) const {
  if (index_.size() != ids.size()) {
    index_.clear();
    for (std::size_t i = 0; i < ids.size(); ++i) index_.emplace(ids[i], fold[i]);
  }
  auto it = index_.find(id);
  if (it == index_.end()) fail(Errc::unknown_id, "id " + id + " is not in the fold plan");
  return it->second;
}

std::vector<std::string> FoldPlan::ids_in(int f) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (fold[i] == f) out.push_back(ids[i]);
  return out;
}

std::vector<std::string> FoldPlan::ids_not_in(int f) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (fold[i] != f) out.push_back(ids[i]);
  return out;
}

std::vector<std::size_t> FoldPlan::rows_in(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::rows_not_in(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (fold[i] != f) out.push_back(i);
  return out;
}

FoldPlan make_folds(std::span<const std::string> ids, std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) fail(Errc::validation, "k must be at least 2");
  if (ids.size() != labels.size()) fail(Errc::length_mismatch, "ids and labels differ in length");
  std::vector<std::size_t> members[2];
  for (std::size_t i = 0; i < ids.size(); ++i) members[labels[i] ? 1 : 0].push_back(i);
  for (int c : {1, 0})
    if (members[c].size() < static_cast<std::size_t>(k))
      fail(Errc::insufficient_class, "class " + std::to_string(c) + " has " + std::to_string(members[c].size()) +
                                         " members, fewer than k = " + std::to_string(k));

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.ids.assign(ids.begin(), ids.end());
  plan.fold.assign(ids.size(), -1);
  std::size_t next = 0;
  for (int c : {1, 0}) {
    Rng rng = Rng::stream(seed, Stream::folds, {static_cast<std::uint64_t>(c)});
    rng.shuffle(std::span<std::size_t>(members[c]));
    for (std::size_t row : members[c]) plan.fold[row] = static_cast<int>(next++ % static_cast<std::size_t>(k));
  }
  return plan;
}

void write_fold_csv(std::ostream& out, const FoldPlan& plan) {
  csv::write_row(out, {"id", "fold"});
  for (std::size_t i = 0; i < plan.ids.size(); ++i) csv::write_row(out, {plan.ids[i], std::to_string(plan.fold[i])});
}

FoldPlan read_fold_csv(std::istream& in, int k, std::uint64_t seed) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || *header != csv::Row{"id", "fold"}) fail(Errc::validation, "fold file must start with 'id,fold'");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  std::unordered_set<std::string> seen;
  while (auto row = reader.next()) {
    double f = 0;
    if (row->size() != 2 || !parse_double((*row)[1], f) || f < 0 || f >= k || f != static_cast<int>(f))
      fail(Errc::validation, "fold file line " + std::to_string(reader.line()) + " is malformed");
    if (!seen.insert((*row)[0]).second) fail(Errc::duplicate_id, "duplicate id in fold file: " + (*row)[0]);
    plan.ids.push_back((*row)[0]);
    plan.fold.push_back(static_cast<int>(f));
  }
  return plan;
}

void ScoredColumn::write_csv(std::ostream& out) const {
  csv::write_row(out, {"id", "score", "producing_fold"});
  for (const auto& [id, e] : entries) csv::write_row(out, {id, format_double(e.score), std::to_string(e.producing_fold)});
}

ScoredColumn ScoredColumn::read_csv(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || *header != csv::Row{"id", "score", "producing_fold"})
    fail(Errc::validation, "score file must start with 'id,score,producing_fold'");
  ScoredColumn col;
  while (auto row = reader.next()) {
    double s = 0;
    double f = 0;
    if (row->size() != 3 || !parse_double((*row)[1], s) || !parse_double((*row)[2], f))
      fail(Errc::validation, "score file line " + std::to_string(reader.line()) + " is malformed");
    if (!col.entries.emplace((*row)[0], ScoredEntry{s, static_cast<int>(f)}).second)
      fail(Errc::duplicate_id, "duplicate id in score file: " + (*row)[0]);
  }
  return col;
}

nlohmann::json ScoredColumn::provenance_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [f, ids] : provenance) j[std::to_string(f)] = ids;
  return j;
}

void ScoredColumn::load_provenance(const nlohmann::json& j) {
  provenance.clear();
  for (auto it = j.begin(); it != j.end(); ++it)
    provenance[std::stoi(it.key())] = it.value().get<std::vector<std::string>>();
}

ScoreGeneration generate_leakage_free_scores(const encoder::EmbeddingStore& store,
                                             const scorehead::LabelMap& labels, const FoldPlan& plan,
                                             std::uint64_t seed, const std::vector<scorehead::ScoreHeadConfig>& grid,
                                             const scorehead::TrainingOptions& options, Exec exec) {
  for (const auto& id : plan.ids)
    if (!store.contains(id)) fail(Errc::unknown_id, "encoder has no vector for id " + id);

  ScoreGeneration gen;
  for (int f = 0; f < plan.k; ++f) {
    const auto train_ids = plan.ids_not_in(f);
    const auto score_ids = plan.ids_in(f);
    scorehead::Selection sel;
    try {
      sel = scorehead::select_architecture(store, labels, train_ids,
                                           Rng::derive_seed(seed, Stream::head_split, {static_cast<std::uint64_t>(f)}),
                                           grid, options, exec);
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
    const auto scores = scorehead::score(sel.head, store, score_ids);
    for (std::size_t i = 0; i < score_ids.size(); ++i) gen.column.entries[score_ids[i]] = {scores[i], f};
    gen.column.provenance[f] = sel.head.provenance;
    const auto& winner = *std::find_if(sel.outcomes.begin(), sel.outcomes.end(),
                                       [&](const auto& o) { return o.config == sel.config; });
    gen.folds.push_back({f, sel.config, winner.test_loss, winner.selected_epochs, sel.outcomes.size()});
    gen.heads.push_back(std::move(sel.head));
  }
  return gen;
}

std::vector<Violation> assert_no_leakage(const ScoredColumn& column, const FoldPlan& plan) {
  std::set<std::string> plan_ids(plan.ids.begin(), plan.ids.end());
  if (plan_ids.size() != column.entries.size() ||
      !std::equal(plan_ids.begin(), plan_ids.end(), column.entries.begin(),
                  [](const std::string& a, const auto& kv) { return a == kv.first; }))
    fail(Errc::validation, "score column and fold plan cover different ids");

  std::map<int, std::unordered_set<std::string>> trained_on;
  for (const auto& [f, ids] : column.provenance) trained_on[f].insert(ids.begin(), ids.end());

  std::vector<Violation> violations;
  for (const auto& [id, entry] : column.entries) {
    const int own = plan.fold_of(id);
    std::string reason;
    if (entry.producing_fold != own) {
      reason = "scored by fold " + std::to_string(entry.producing_fold) + " model, own fold is " + std::to_string(own);
    }
    auto it = trained_on.find(entry.producing_fold);
    if (it == trained_on.end()) {
      if (!reason.empty()) reason += "; ";
      reason += "no training provenance recorded for the fold " + std::to_string(entry.producing_fold) + " model";
    } else if (it->second.count(id)) {
      if (!reason.empty()) reason += "; ";
      reason += "id is in the training set of the fold " + std::to_string(entry.producing_fold) + " model";
    }
    if (!reason.empty()) violations.push_back({id, std::move(reason)});
  }
  return violations;
}

}  // namespace textrisk::folds
