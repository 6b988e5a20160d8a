#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace textrisk::data {

// Web-form prompt the platform pre-filled into empty descriptions.
inline constexpr std::string_view kBoilerplatePrompt = "Tell your story. What is your loan for?";

struct CleanOutcome {
  std::optional<std::string> text;  // nullopt = REJECT
  bool boilerplate_substring_hit = false;
};

// Strips line-break tags, decodes HTML entities (named and numeric), removes
// every "Borrower added on DD/MM/YY(YY) >" stamp, collapses whitespace, and
// removes the boilerplate prompt (case-insensitive). Returns nullopt when
// nothing but whitespace remains.
std::optional<std::string> clean_description(std::string_view raw);

// Same as clean_description, also reporting whether the prompt was found
// embedded in otherwise non-empty text.
CleanOutcome clean_description_detailed(std::string_view raw);

std::string decode_html_entities(std::string_view text);
std::string collapse_whitespace(std::string_view text);

}  // namespace textrisk::data
