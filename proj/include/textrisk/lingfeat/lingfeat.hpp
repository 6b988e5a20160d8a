#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "textrisk/common/exec.hpp"

namespace textrisk::lingfeat {

// Checksum of data/lexicon_en.tsv (v1); reports carry it next to the features.
inline constexpr std::string_view kBundledLexiconSha256 =
    "c541424ef98d98fc950dc8cb85e685e85bf73ac9446f5c7f86aaba8ba3336106";

struct LinguisticFeatures {
  std::size_t word_count = 0;
  double readability = 0.0;   // Flesch Reading Ease
  double polarity = 0.0;      // [-1, 1]
  double subjectivity = 0.0;  // [0, 1]
};

struct LexiconEntry {
  double polarity = 0.0;
  double subjectivity = 0.0;
};

// word<TAB>polarity<TAB>subjectivity, one lowercase word per line.
class Lexicon {
 public:
  static Lexicon parse(std::string_view tsv);
  static Lexicon load(const std::filesystem::path& path);
  // data/lexicon_en.tsv, checksum-verified.
  static const Lexicon& bundled();

  const LexiconEntry* find(std::string_view word) const;
  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& sha256() const noexcept { return sha256_; }

 private:
  std::unordered_map<std::string, LexiconEntry> entries_;
  std::string sha256_;
};

// Whitespace-delimited tokens holding at least one ASCII alphanumeric.
std::size_t word_count(std::string_view text);

// Segments between runs of '.', '!' or '?' that contain a word; at least 1.
std::size_t sentence_count(std::string_view text);

// Vowel-group count with a silent trailing 'e'; at least 1.
std::size_t syllable_count(std::string_view word);

// 206.835 - 1.015 (words/sentences) - 84.6 (syllables/words); nullopt when
// the text has no words.
std::optional<double> flesch_reading_ease(std::string_view text);

// Means of lexicon weights over matched tokens; (0, 0) without matches.
std::pair<double, double> polarity_subjectivity(std::string_view text, const Lexicon& lexicon);

// nullopt when the text has no words (the row drops out of linguistic analyses).
std::optional<LinguisticFeatures> compute(std::string_view text, const Lexicon& lexicon);

std::vector<std::optional<LinguisticFeatures>> compute_batch(std::span<const std::string> texts,
                                                             const Lexicon& lexicon, Exec exec = Exec::parallel);

}  // namespace textrisk::lingfeat
