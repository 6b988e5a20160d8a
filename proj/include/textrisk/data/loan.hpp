#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace textrisk::data {

struct LoanRecord {
  std::string id;
  double revenue = 0.0;
  double dti_n = 0.0;
  double loan_amnt = 0.0;
  double fico_n = 0.0;
  std::string emp_length;
  std::string purpose;
  std::string home_ownership;
  std::string addr_state;
  std::string desc;
  int label = 0;  // 1 = default
};

inline constexpr std::array<std::string_view, 4> kQuantitativeColumns = {"revenue", "dti_n", "loan_amnt",
                                                                        "fico_n"};
inline constexpr std::array<std::string_view, 4> kCategoricalColumns = {"emp_length", "purpose",
                                                                       "home_ownership", "addr_state"};

inline constexpr std::array<std::string_view, 12> kEmpLengthLevels = {
    "< 1 year", "1 year",  "2 years", "3 years", "4 years",   "5 years",
    "6 years",  "7 years", "8 years", "9 years", "10+ years", "NI"};

inline constexpr std::array<std::string_view, 14> kPurposeLevels = {
    "car",     "credit card", "debt consolidation", "educational",      "home improvement",
    "house",   "major purchase", "medical",         "moving",           "other",
    "renewable energy", "small business", "vacation", "wedding"};

inline constexpr std::array<std::string_view, 4> kHomeOwnershipLevels = {"MORTGAGE", "OTHER", "OWN", "RENT"};

double quantitative_value(const LoanRecord& r, std::string_view column);
const std::string& categorical_value(const LoanRecord& r, std::string_view column);

// Mean of the bureau score range bounds. Throws Errc::validation naming the row.
double derive_fico(double fico_low, double fico_high, std::string_view row_id = {});

// OTHER/NONE/ANY -> OTHER, MORTGAGE/OWN/RENT unchanged (case-insensitive input).
std::string merge_home_ownership(std::string_view level);

// Canonical employment-length level; blank or "n/a" map to "NI".
std::string normalize_emp_length(std::string_view level);

// Lowercase, underscores to spaces ("debt_consolidation" -> "debt consolidation").
std::string normalize_purpose(std::string_view level);

// Throws Errc::validation when a record breaks a LoanRecord invariant.
void validate_record(const LoanRecord& r);

}  // namespace textrisk::data
