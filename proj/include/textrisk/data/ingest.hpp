#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "textrisk/data/loan.hpp"

namespace textrisk::data {

// Canonical field -> source header. Canonical input fields:
//   id, revenue, dti_n, loan_amnt, fico_n, emp_length, purpose,
//   home_ownership, addr_state, desc, label
// plus the alternatives fico_range_low/fico_range_high (averaged into fico_n)
// and dti_obligations/dti_income (monthly obligations over monthly income,
// times 100) when dti_n is absent.
struct ColumnMap {
  std::map<std::string, std::string> source;

  std::string header_for(const std::string& canonical) const;
  static ColumnMap from_json(const nlohmann::json& j);
};

struct IngestStats {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::map<std::string, std::size_t> dropped;  // reason -> count
  std::size_t boilerplate_substring_hits = 0;
  std::vector<std::string> ignored_columns;
  std::size_t defaults = 0;

  nlohmann::json to_json() const;
};

struct IngestResult {
  std::vector<LoanRecord> records;
  IngestStats stats;
};

// Parses and filters a raw export. Rows lacking a quantitative field, rows
// whose description cleans to nothing, and rows outside the category sets are
// dropped and counted. Malformed values (bad numbers, unknown home ownership,
// out-of-range bureau scores, duplicate ids) throw Errc::validation.
IngestResult ingest_csv(std::istream& in, const ColumnMap& columns = {});

// Canonical cleaned-record file (records.csv).
void write_records_csv(std::ostream& out, const std::vector<LoanRecord>& records);
std::vector<LoanRecord> read_records_csv(std::istream& in);

}  // namespace textrisk::data
