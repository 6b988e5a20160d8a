#include "textrisk/lingfeat/lingfeat.hpp"

#include <algorithm>
#include <cctype>

#include "textrisk/common/digest.hpp"
#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"

namespace textrisk::lingfeat {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; }

template <typename F>
void for_each_token(std::string_view text, F&& f) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) f(text.substr(start, i - start));
  }
}

bool is_word(std::string_view token) { return std::any_of(token.begin(), token.end(), is_alnum); }

// Lowercased token with leading/trailing punctuation removed.
std::string normalize_token(std::string_view token) {
  while (!token.empty() && !is_alnum(token.front())) token.remove_prefix(1);
  while (!token.empty() && !is_alnum(token.back())) token.remove_suffix(1);
  std::string out(token);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

Lexicon Lexicon::parse(std::string_view tsv) {
  Lexicon lex;
  lex.sha256_ = sha256_hex(tsv);
  std::size_t line_no = 0;
  while (!tsv.empty()) {
    std::size_t nl = tsv.find('\n');
    std::string_view line = tsv.substr(0, nl);
    tsv = nl == std::string_view::npos ? std::string_view{} : tsv.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    std::size_t t1 = line.find('\t');
    std::size_t t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
    LexiconEntry e;
    if (t2 == std::string_view::npos || !parse_double(line.substr(t1 + 1, t2 - t1 - 1), e.polarity) ||
        !parse_double(line.substr(t2 + 1), e.subjectivity) || e.polarity < -1.0 || e.polarity > 1.0 ||
        e.subjectivity < 0.0 || e.subjectivity > 1.0)
      fail(Errc::validation, "lexicon line " + std::to_string(line_no) + " is malformed");
    lex.entries_.emplace(std::string(line.substr(0, t1)), e);
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) { return parse(read_file(path)); }

const Lexicon& Lexicon::bundled() {
  static const Lexicon lex = [] {
    Lexicon l = load(std::filesystem::path(TEXTRISK_DATA_DIR) / "lexicon_en.tsv");
    if (l.sha256() != kBundledLexiconSha256)
      fail(Errc::validation, "bundled lexicon checksum mismatch: " + l.sha256());
    return l;
  }();
  return lex;
}

const LexiconEntry* Lexicon::find(std::string_view word) const {
  auto it = entries_.find(std::string(word));
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  for_each_token(text, [&](std::string_view tok) { n += is_word(tok) ? 1 : 0; });
  return n;
}

std::size_t sentence_count(std::string_view text) {
  std::size_t sentences = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    while (i < text.size() && !is_terminal(text[i])) ++i;
    if (word_count(text.substr(start, i - start)) > 0) ++sentences;
    while (i < text.size() && is_terminal(text[i])) ++i;
  }
  return std::max<std::size_t>(sentences, 1);
}

std::size_t syllable_count(std::string_view word) {
  std::string letters;
  for (char c : word)
    if (std::isalpha(static_cast<unsigned char>(c)))
      letters.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (letters.empty()) return 1;
  std::size_t groups = 0;
  bool prev_vowel = false;
  for (char c : letters) {
    bool v = is_vowel(c);
    if (v && !prev_vowel) ++groups;
    prev_vowel = v;
  }
  // Silent trailing 'e' ("make"), but not consonant + "le" ("table").
  const std::size_t n = letters.size();
  if (groups > 1 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]) &&
      !(letters[n - 2] == 'l' && n >= 3 && !is_vowel(letters[n - 3])))
    --groups;
  return std::max<std::size_t>(groups, 1);
}

std::optional<double> flesch_reading_ease(std::string_view text) {
  std::size_t words = 0;
  std::size_t syllables = 0;
  for_each_token(text, [&](std::string_view tok) {
    if (!is_word(tok)) return;
    ++words;
    syllables += syllable_count(tok);
  });
  if (words == 0) return std::nullopt;
  const double w = static_cast<double>(words);
  // A token such as "e.g." or "3.5" can end a sentence inside one word; a
  // sentence never holds less than one word.
  const double sentences = static_cast<double>(std::min(sentence_count(text), words));
  return 206.835 - 1.015 * (w / sentences) -
         84.6 * (static_cast<double>(syllables) / w);
}

std::pair<double, double> polarity_subjectivity(std::string_view text, const Lexicon& lexicon) {
  double pol = 0.0;
  double subj = 0.0;
  std::size_t matches = 0;
  for_each_token(text, [&](std::string_view tok) {
    std::string word = normalize_token(tok);
    if (word.empty()) return;
    if (const LexiconEntry* e = lexicon.find(word)) {
      pol += e->polarity;
      subj += e->subjectivity;
      ++matches;
    }
  });
  if (matches == 0) return {0.0, 0.0};
  const double m = static_cast<double>(matches);
  return {std::clamp(pol / m, -1.0, 1.0), std::clamp(subj / m, 0.0, 1.0)};
}

std::optional<LinguisticFeatures> compute(std::string_view text, const Lexicon& lexicon) {
  auto fre = flesch_reading_ease(text);
  if (!fre) return std::nullopt;
  LinguisticFeatures f;
  f.word_count = word_count(text);
  f.readability = *fre;
  std::tie(f.polarity, f.subjectivity) = polarity_subjectivity(text, lexicon);
  return f;
}

std::vector<std::optional<LinguisticFeatures>> compute_batch(std::span<const std::string> texts,
                                                             const Lexicon& lexicon, Exec exec) {
  std::vector<std::optional<LinguisticFeatures>> out(texts.size());
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = compute(texts[i], lexicon);
  } else {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = compute(texts[i], lexicon);
  }
  return out;
}

}  // namespace textrisk::lingfeat
