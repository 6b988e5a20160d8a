#include "textrisk/data/feature_table.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "textrisk/common/csv.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"

namespace textrisk::data {

std::size_t FeatureTable::column_index(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) fail(Errc::validation, "feature table has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

nlohmann::json FeatureTable::encoding_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& block : blocks) {
    nlohmann::json levels = nlohmann::json::object();
    for (std::size_t i = 0; i < block.levels.size(); ++i) levels[block.levels[i]] = block.first_column + i;
    j[block.variable] = levels;
  }
  return j;
}

FeatureTable build_feature_table(const std::vector<LoanRecord>& records, const std::vector<ExtraColumn>& extra) {
  FeatureTable table;
  std::unordered_set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.id).second) fail(Errc::duplicate_id, "duplicate id " + r.id);
    table.ids.push_back(r.id);
    table.labels.push_back(r.label);
  }

  for (const auto& extra_col : extra) {
    std::vector<std::string> missing;
    std::vector<std::string> unexpected;
    for (const auto& id : table.ids)
      if (!extra_col.values.count(id)) missing.push_back(id);
    for (const auto& [id, value] : extra_col.values)
      if (!ids.count(id)) unexpected.push_back(id);
    if (!missing.empty() || !unexpected.empty()) {
      std::sort(missing.begin(), missing.end());
      std::sort(unexpected.begin(), unexpected.end());
      std::string msg = "extra column '" + extra_col.name + "' misaligned;";
      auto list = [&](const char* label, const std::vector<std::string>& v) {
        if (v.empty()) return;
        msg += std::string(" ") + label + ":";
        for (std::size_t i = 0; i < v.size() && i < 20; ++i) msg += " " + v[i];
        if (v.size() > 20) msg += " ... (" + std::to_string(v.size()) + " total)";
      };
      list("missing ids", missing);
      list("unknown ids", unexpected);
      fail(Errc::validation, msg);
    }
  }

  for (auto name : kQuantitativeColumns) table.columns.emplace_back(name);
  table.quantitative_count = table.columns.size();

  for (auto variable : kCategoricalColumns) {
    std::set<std::string> levels;
    for (const auto& r : records) levels.insert(categorical_value(r, variable));
    OneHotBlock block{std::string(variable), {levels.begin(), levels.end()}, table.columns.size()};
    for (const auto& level : block.levels) table.columns.push_back(block.variable + "=" + level);
    table.blocks.push_back(std::move(block));
  }
  for (const auto& extra_col : extra) table.columns.push_back(extra_col.name);
  table.extra_count = extra.size();

  table.values = Matrix(records.size(), table.columns.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto row = table.values.row(i);
    for (std::size_t q = 0; q < kQuantitativeColumns.size(); ++q)
      row[q] = quantitative_value(r, kQuantitativeColumns[q]);
    for (const auto& block : table.blocks) {
      const auto& level = categorical_value(r, block.variable);
      auto it = std::lower_bound(block.levels.begin(), block.levels.end(), level);
      row[block.first_column + static_cast<std::size_t>(it - block.levels.begin())] = 1.0;
    }
    std::size_t c = table.columns.size() - extra.size();
    for (const auto& extra_col : extra) row[c++] = extra_col.values.at(r.id);
  }
  return table;
}

void write_feature_csv(std::ostream& out, const FeatureTable& table) {
  csv::Row header{"id"};
  header.insert(header.end(), table.columns.begin(), table.columns.end());
  header.push_back("label");
  csv::write_row(out, header);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    csv::Row row{table.ids[i]};
    for (double v : table.values.row(i)) row.push_back(format_double(v));
    row.push_back(std::to_string(table.labels[i]));
    csv::write_row(out, row);
  }
}

}  // namespace textrisk::data
