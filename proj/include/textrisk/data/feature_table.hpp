#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "textrisk/common/matrix.hpp"
#include "textrisk/data/loan.hpp"

namespace textrisk::data {

// Numeric column keyed by row id, appended after the tabular block.
struct ExtraColumn {
  std::string name;
  std::unordered_map<std::string, double> values;
};

struct OneHotBlock {
  std::string variable;
  std::vector<std::string> levels;  // sorted; column i of the block = levels[i]
  std::size_t first_column = 0;
};

// Column order: revenue, dti_n, loan_amnt, fico_n, then one-hot blocks for
// emp_length, purpose, home_ownership, addr_state (observed levels, sorted
// bytewise), then extra columns in the order given. One-hot column names are
// "<variable>=<level>".
struct FeatureTable {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Matrix values;
  std::vector<int> labels;
  std::vector<OneHotBlock> blocks;
  std::size_t quantitative_count = 0;
  std::size_t extra_count = 0;

  std::size_t rows() const noexcept { return ids.size(); }
  std::size_t column_index(const std::string& name) const;
  nlohmann::json encoding_json() const;
};

FeatureTable build_feature_table(const std::vector<LoanRecord>& records,
                                 const std::vector<ExtraColumn>& extra = {});

// CSV: header "id,<columns...>,label"; numbers in shortest round-trip form.
void write_feature_csv(std::ostream& out, const FeatureTable& table);

}  // namespace textrisk::data
