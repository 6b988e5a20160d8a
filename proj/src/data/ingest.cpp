#include "textrisk/data/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "textrisk/common/csv.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"
#include "textrisk/data/description.hpp"

namespace textrisk::data {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string to_upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

double parse_field(const std::string& text, const char* field, const std::string& id) {
  double v = 0.0;
  std::string t = trim(text);
  if (!t.empty() && t.back() == '%') t.pop_back();
  if (!parse_double(t, v) || !std::isfinite(v))
    fail(Errc::validation, std::string("row ") + id + ": malformed " + field + " '" + text + "'");
  return v;
}

int parse_label(const std::string& text, const std::string& id) {
  std::string t = to_lower(trim(text));
  if (t == "1" || t == "1.0" || t == "true" || t == "default" || t == "charged off") return 1;
  if (t == "0" || t == "0.0" || t == "false" || t == "non-default" || t == "fully paid") return 0;
  fail(Errc::validation, "row " + id + ": unrecognized label '" + text + "'");
}

bool is_state_code(const std::string& s) {
  return s.size() == 2 && std::isupper(static_cast<unsigned char>(s[0])) &&
         std::isupper(static_cast<unsigned char>(s[1]));
}

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& levels, std::string_view v) {
  return std::find(levels.begin(), levels.end(), v) != levels.end();
}

const std::vector<std::string>& known_fields() {
  static const std::vector<std::string> fields = {
      "id",         "revenue",        "dti_n",           "dti_obligations", "dti_income",
      "loan_amnt",  "fico_n",         "fico_range_low",  "fico_range_high", "emp_length",
      "purpose",    "home_ownership", "addr_state",      "desc",            "label"};
  return fields;
}

}  // namespace

double quantitative_value(const LoanRecord& r, std::string_view column) {
  if (column == "revenue") return r.revenue;
  if (column == "dti_n") return r.dti_n;
  if (column == "loan_amnt") return r.loan_amnt;
  if (column == "fico_n") return r.fico_n;
  fail(Errc::validation, "unknown quantitative column " + std::string(column));
}

const std::string& categorical_value(const LoanRecord& r, std::string_view column) {
  if (column == "emp_length") return r.emp_length;
  if (column == "purpose") return r.purpose;
  if (column == "home_ownership") return r.home_ownership;
  if (column == "addr_state") return r.addr_state;
  fail(Errc::validation, "unknown categorical column " + std::string(column));
}

double derive_fico(double fico_low, double fico_high, std::string_view row_id) {
  if (!(fico_low >= 300.0 && fico_high <= 850.0 && fico_low <= fico_high))
    fail(Errc::validation, "row " + std::string(row_id) + ": bureau score range [" + format_double(fico_low) +
                               ", " + format_double(fico_high) + "] outside [300, 850]");
  return (fico_low + fico_high) / 2.0;
}

std::string merge_home_ownership(std::string_view level) {
  std::string up = to_upper(trim(level));
  if (up == "OTHER" || up == "NONE" || up == "ANY") return "OTHER";
  if (up == "MORTGAGE" || up == "OWN" || up == "RENT") return up;
  fail(Errc::validation, "unknown home_ownership level '" + std::string(level) + "'");
}

std::string normalize_emp_length(std::string_view level) {
  std::string t = to_lower(trim(level));
  if (t.empty() || t == "n/a" || t == "na" || t == "ni") return "NI";
  for (std::string_view canonical : kEmpLengthLevels)
    if (to_lower(std::string(canonical)) == t) return std::string(canonical);
  return trim(level);
}

std::string normalize_purpose(std::string_view level) {
  std::string t = to_lower(trim(level));
  std::replace(t.begin(), t.end(), '_', ' ');
  return t;
}

void validate_record(const LoanRecord& r) {
  auto bad = [&](const std::string& what) { fail(Errc::validation, "row " + r.id + ": " + what); };
  if (r.id.empty()) bad("empty id");
  if (!(r.fico_n >= 300.0 && r.fico_n <= 850.0)) bad("fico_n outside [300, 850]");
  if (!(r.revenue >= 0.0)) bad("negative revenue");
  if (!(r.loan_amnt > 0.0)) bad("non-positive loan_amnt");
  if (!(r.dti_n >= 0.0)) bad("negative dti_n");
  if (!contains(kEmpLengthLevels, r.emp_length)) bad("emp_length '" + r.emp_length + "'");
  if (!contains(kPurposeLevels, r.purpose)) bad("purpose '" + r.purpose + "'");
  if (!contains(kHomeOwnershipLevels, r.home_ownership)) bad("home_ownership '" + r.home_ownership + "'");
  if (!is_state_code(r.addr_state)) bad("addr_state '" + r.addr_state + "'");
  if (collapse_whitespace(r.desc).empty()) bad("empty description");
  if (r.label != 0 && r.label != 1) bad("label not binary");
}

std::string ColumnMap::header_for(const std::string& canonical) const {
  auto it = source.find(canonical);
  return it == source.end() ? canonical : it->second;
}

ColumnMap ColumnMap::from_json(const nlohmann::json& j) {
  ColumnMap map;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known_fields().begin(), known_fields().end(), it.key()) == known_fields().end())
      fail(Errc::validation, "column map: unknown canonical field '" + it.key() + "'");
    map.source[it.key()] = it.value().get<std::string>();
  }
  return map;
}

nlohmann::json IngestStats::to_json() const {
  nlohmann::json j;
  j["rows_read"] = rows_read;
  j["rows_kept"] = rows_kept;
  j["dropped"] = dropped;
  j["boilerplate_substring_hits"] = boilerplate_substring_hits;
  j["ignored_columns"] = ignored_columns;
  j["defaults"] = defaults;
  j["default_rate"] = rows_kept ? static_cast<double>(defaults) / static_cast<double>(rows_kept) : 0.0;
  return j;
}

IngestResult ingest_csv(std::istream& in, const ColumnMap& columns) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) fail(Errc::validation, "input CSV has no header row");
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0) header->front().erase(0, 3);

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header->size(); ++i) position.emplace(trim((*header)[i]), i);

  std::unordered_map<std::string, std::size_t> col;
  std::set<std::size_t> used;
  for (const auto& field : known_fields()) {
    auto it = position.find(columns.header_for(field));
    if (it != position.end()) {
      col[field] = it->second;
      used.insert(it->second);
    }
  }
  for (const char* required : {"id", "revenue", "loan_amnt", "emp_length", "purpose", "home_ownership",
                               "addr_state", "desc", "label"})
    if (!col.count(required))
      fail(Errc::validation, std::string("input CSV lacks column '") + columns.header_for(required) + "'");
  const bool fico_direct = col.count("fico_n") > 0;
  if (!fico_direct && !(col.count("fico_range_low") && col.count("fico_range_high")))
    fail(Errc::validation, "input CSV needs fico_n or fico_range_low/fico_range_high");
  const bool dti_direct = col.count("dti_n") > 0;
  if (!dti_direct && !(col.count("dti_obligations") && col.count("dti_income")))
    fail(Errc::validation, "input CSV needs dti_n or dti_obligations/dti_income");

  IngestResult result;
  for (std::size_t i = 0; i < header->size(); ++i)
    if (!used.count(i)) result.stats.ignored_columns.push_back((*header)[i]);

  auto drop = [&](const std::string& reason) { ++result.stats.dropped[reason]; };
  std::unordered_set<std::string> seen;

  while (auto row = reader.next()) {
    if (row->size() == 1 && trim(row->front()).empty()) continue;
    ++result.stats.rows_read;
    if (row->size() != header->size())
      fail(Errc::validation, "line " + std::to_string(reader.line()) + ": expected " +
                                 std::to_string(header->size()) + " fields, got " + std::to_string(row->size()));
    auto field = [&](const char* name) -> const std::string& { return (*row)[col.at(name)]; };

    LoanRecord r;
    r.id = trim(field("id"));
    if (r.id.empty()) fail(Errc::validation, "line " + std::to_string(reader.line()) + ": empty id");

    std::vector<const char*> quantitative = {"revenue", "loan_amnt"};
    if (fico_direct) quantitative.push_back("fico_n");
    else {
      quantitative.push_back("fico_range_low");
      quantitative.push_back("fico_range_high");
    }
    if (dti_direct) quantitative.push_back("dti_n");
    else {
      quantitative.push_back("dti_obligations");
      quantitative.push_back("dti_income");
    }
    bool missing = std::any_of(quantitative.begin(), quantitative.end(),
                               [&](const char* name) { return trim(field(name)).empty(); });
    if (missing) {
      drop("missing_quantitative");
      continue;
    }

    r.revenue = parse_field(field("revenue"), "revenue", r.id);
    r.loan_amnt = parse_field(field("loan_amnt"), "loan_amnt", r.id);
    if (fico_direct) {
      r.fico_n = parse_field(field("fico_n"), "fico_n", r.id);
    } else {
      r.fico_n = derive_fico(parse_field(field("fico_range_low"), "fico_range_low", r.id),
                             parse_field(field("fico_range_high"), "fico_range_high", r.id), r.id);
    }
    if (dti_direct) {
      r.dti_n = parse_field(field("dti_n"), "dti_n", r.id);
    } else {
      double obligations = parse_field(field("dti_obligations"), "dti_obligations", r.id);
      double income = parse_field(field("dti_income"), "dti_income", r.id);
      if (!(income > 0.0)) {
        drop("zero_income");
        continue;
      }
      r.dti_n = obligations / income * 100.0;
    }

    r.emp_length = normalize_emp_length(field("emp_length"));
    r.purpose = normalize_purpose(field("purpose"));
    r.home_ownership = merge_home_ownership(field("home_ownership"));
    r.addr_state = to_upper(trim(field("addr_state")));
    r.label = parse_label(field("label"), r.id);

    if (!contains(kEmpLengthLevels, r.emp_length)) {
      drop("unknown_emp_length");
      continue;
    }
    if (!contains(kPurposeLevels, r.purpose)) {
      drop("unknown_purpose");
      continue;
    }
    if (!is_state_code(r.addr_state)) {
      drop("unknown_addr_state");
      continue;
    }

    const std::string& raw_desc = field("desc");
    CleanOutcome cleaned = clean_description_detailed(raw_desc);
    if (!cleaned.text) {
      drop(collapse_whitespace(raw_desc).empty() ? "missing_description" : "rejected_description");
      continue;
    }
    if (cleaned.boilerplate_substring_hit) ++result.stats.boilerplate_substring_hits;
    r.desc = std::move(*cleaned.text);

    validate_record(r);
    if (!seen.insert(r.id).second) fail(Errc::duplicate_id, "duplicate id " + r.id);
    result.stats.defaults += static_cast<std::size_t>(r.label);
    result.records.push_back(std::move(r));
  }
  result.stats.rows_kept = result.records.size();
  return result;
}

void write_records_csv(std::ostream& out, const std::vector<LoanRecord>& records) {
  csv::write_row(out, {"id", "revenue", "dti_n", "loan_amnt", "fico_n", "emp_length", "purpose",
                       "home_ownership", "addr_state", "desc", "label"});
  for (const auto& r : records) {
    csv::write_row(out, {r.id, format_double(r.revenue), format_double(r.dti_n), format_double(r.loan_amnt),
                         format_double(r.fico_n), r.emp_length, r.purpose, r.home_ownership, r.addr_state,
                         r.desc, std::to_string(r.label)});
  }
}

std::vector<LoanRecord> read_records_csv(std::istream& in) {
  csv::Reader reader(in);
  auto header = reader.next();
  const csv::Row expected = {"id", "revenue", "dti_n", "loan_amnt", "fico_n", "emp_length", "purpose",
                             "home_ownership", "addr_state", "desc", "label"};
  if (!header || *header != expected) fail(Errc::validation, "records file has an unexpected header");
  std::vector<LoanRecord> records;
  std::unordered_set<std::string> seen;
  while (auto row = reader.next()) {
    if (row->size() != expected.size())
      fail(Errc::validation, "records file line " + std::to_string(reader.line()) + ": wrong field count");
    const auto& f = *row;
    LoanRecord r;
    r.id = f[0];
    r.revenue = parse_field(f[1], "revenue", r.id);
    r.dti_n = parse_field(f[2], "dti_n", r.id);
    r.loan_amnt = parse_field(f[3], "loan_amnt", r.id);
    r.fico_n = parse_field(f[4], "fico_n", r.id);
    r.emp_length = f[5];
    r.purpose = f[6];
    r.home_ownership = f[7];
    r.addr_state = f[8];
    r.desc = f[9];
    r.label = parse_label(f[10], r.id);
    validate_record(r);
    if (!seen.insert(r.id).second) fail(Errc::duplicate_id, "duplicate id " + r.id);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace textrisk::data
