#include "textrisk/data/description.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <string_view>
#include <utility>

namespace textrisk::data {

namespace {

constexpr std::pair<std::string_view, std::string_view> kNamedEntities[] = {
    {"amp", "&"},        {"lt", "<"},          {"gt", ">"},          {"quot", "\""},
    {"apos", "'"},       {"nbsp", " "},        {"ndash", "–"},  {"mdash", "—"},
    {"lsquo", "‘"}, {"rsquo", "’"},  {"ldquo", "“"},  {"rdquo", "”"},
    {"hellip", "…"}, {"copy", "©"},  {"reg", "®"},    {"trade", "™"},
    {"cent", "¢"},  {"pound", "£"},  {"euro", "€"},   {"yen", "¥"},
    {"deg", "°"},   {"bull", "•"},   {"middot", "·"}, {"times", "×"},
};

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Numeric reference body after "&#": decimal or x-hex digits.
bool decode_numeric(std::string_view body, std::uint32_t& cp) {
  int base = 10;
  if (!body.empty() && (body[0] == 'x' || body[0] == 'X')) {
    base = 16;
    body.remove_prefix(1);
  }
  if (body.empty() || body.size() > 8) return false;
  std::uint32_t v = 0;
  for (char c : body) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
    else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
    else return false;
    v = v * base + d;
  }
  if (v == 0 || v > 0x10FFFF || (v >= 0xD800 && v <= 0xDFFF)) return false;
  cp = v;
  return true;
}

const std::regex& line_break_tag() {
  static const std::regex re(R"(<\s*br\s*/?\s*>)", std::regex::icase);
  return re;
}

const std::regex& borrower_stamp() {
  static const std::regex re(R"(Borrower added on \d{2}/\d{2}/(\d{4}|\d{2})\s*>)");
  return re;
}

}  // namespace

std::string decode_html_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '&') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out.push_back(text[i++]);
      continue;
    }
    std::string_view body = text.substr(i + 1, semi - i - 1);
    bool decoded = false;
    if (!body.empty() && body[0] == '#') {
      std::uint32_t cp = 0;
      if (decode_numeric(body.substr(1), cp)) {
        append_utf8(out, cp);
        decoded = true;
      }
    } else {
      for (const auto& [name, value] : kNamedEntities) {
        if (body == name) {
          out.append(value);
          decoded = true;
          break;
        }
      }
    }
    if (decoded) {
      i = semi + 1;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending = false;
  for (char c : text) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out.push_back(' ');
      pending = false;
      out.push_back(c);
    }
  }
  return out;
}

CleanOutcome clean_description_detailed(std::string_view raw) {
  std::string text = std::regex_replace(std::string(raw), line_break_tag(), " ");
  text = decode_html_entities(text);
  text = std::regex_replace(text, borrower_stamp(), " ");
  text = collapse_whitespace(text);

  CleanOutcome outcome;
  static const std::string prompt = lower_ascii(collapse_whitespace(kBoilerplatePrompt));
  std::string lowered = lower_ascii(text);
  bool found = false;
  for (std::size_t pos = lowered.find(prompt); pos != std::string::npos; pos = lowered.find(prompt, pos)) {
    found = true;
    text.replace(pos, prompt.size(), " ");
    lowered.replace(pos, prompt.size(), " ");
  }
  if (found) text = collapse_whitespace(text);
  if (text.empty()) return outcome;
  outcome.boilerplate_substring_hit = found;
  outcome.text = std::move(text);
  return outcome;
}

std::optional<std::string> clean_description(std::string_view raw) {
  return clean_description_detailed(raw).text;
}

}  // namespace textrisk::data
