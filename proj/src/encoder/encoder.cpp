#include "textrisk/encoder/encoder.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "textrisk/common/error.hpp"
#include "textrisk/common/numfmt.hpp"

namespace textrisk::encoder {

std::string_view kind_name(EncoderKind kind) {
  return kind == EncoderKind::hashed ? "hashed" : "precomputed";
}

EncoderKind parse_kind(std::string_view name) {
  if (name == "hashed") return EncoderKind::hashed;
  if (name == "precomputed") return EncoderKind::precomputed;
  fail(Errc::validation, "unknown encoder kind '" + std::string(name) + "'");
}

nlohmann::json EncoderMeta::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_name(kind);
  j["dim"] = dim;
  j["provenance"] = provenance;
  if (layer_count) j["layer_count"] = *layer_count;
  if (hidden_size) j["hidden_size"] = *hidden_size;
  if (attention_heads) j["attention_heads"] = *attention_heads;
  return j;
}

EncoderMeta EncoderMeta::from_json(const nlohmann::json& j) {
  EncoderMeta m;
  m.kind = parse_kind(j.at("kind").get<std::string>());
  m.dim = j.at("dim").get<std::size_t>();
  m.provenance = j.value("provenance", "");
  if (j.contains("layer_count")) m.layer_count = j["layer_count"].get<int>();
  if (j.contains("hidden_size")) m.hidden_size = j["hidden_size"].get<int>();
  if (j.contains("attention_heads")) m.attention_heads = j["attention_heads"].get<int>();
  return m;
}

EmbeddingStore::EmbeddingStore(EncoderMeta meta, std::vector<std::string> ids, std::vector<float> values)
    : meta_(std::move(meta)), ids_(std::move(ids)), values_(std::move(values)) {
  if (meta_.dim == 0) fail(Errc::dim_mismatch, "embedding dim must be positive");
  if (values_.size() != ids_.size() * meta_.dim)
    fail(Errc::dim_mismatch, "embedding values do not match count x dim");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!index_.emplace(ids_[i], i).second) fail(Errc::duplicate_id, "duplicate embedding id " + ids_[i]);
  for (float v : values_)
    if (!std::isfinite(v)) fail(Errc::non_finite, "embedding store holds a non-finite value");
}

std::size_t EmbeddingStore::row_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) fail(Errc::unknown_id, "no embedding for id " + std::string(id));
  return it->second;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

// Maximal runs of ASCII alphanumerics or non-ASCII bytes, lowercased.
std::vector<std::string> hash_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

void accumulate(std::vector<double>& v, std::string_view feature) {
  const std::uint64_t h = fnv1a64(feature);
  v[h % v.size()] += (h >> 63) ? -1.0 : 1.0;
}

}  // namespace

std::vector<double> hashed_encode(std::string_view text, std::size_t dim) {
  if (dim < 2) fail(Errc::validation, "hashed encoder dim must be >= 2");
  std::vector<double> v(dim, 0.0);
  const auto tokens = hash_tokens(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    accumulate(v, tokens[i]);
    if (i + 1 < tokens.size()) accumulate(v, tokens[i] + " " + tokens[i + 1]);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

EmbeddingStore hashed_store(std::span<const std::string> ids, std::span<const std::string> texts,
                            std::size_t dim, Exec exec) {
  if (ids.size() != texts.size()) fail(Errc::length_mismatch, "ids and texts differ in length");
  std::vector<float> values(ids.size() * dim);
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
  auto encode_row = [&](std::ptrdiff_t i) {
    auto v = hashed_encode(texts[i], dim);
    for (std::size_t d = 0; d < dim; ++d) values[i * dim + d] = static_cast<float>(v[d]);
  };
  if (exec == Exec::serial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) encode_row(i);
  } else {
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) encode_row(i);
  }
  EncoderMeta meta{EncoderKind::hashed, dim, "fnv1a64 signed unigram+bigram hashing, dim " + std::to_string(dim),
                   std::nullopt, std::nullopt, std::nullopt};
  return EmbeddingStore(std::move(meta), {ids.begin(), ids.end()}, std::move(values));
}

EmbeddingStore load_embeddings(std::istream& in, EncoderMeta meta) {
  std::string line;
  if (!std::getline(in, line)) fail(Errc::truncated, "embedding file is empty");
  std::size_t dim = 0;
  std::size_t count = 0;
  {
    if (line.rfind("EMB1 ", 0) != 0) fail(Errc::validation, "embedding header must start with 'EMB1 '");
    std::string_view rest(line);
    rest.remove_prefix(5);
    std::size_t sp = rest.find(' ');
    double d = 0;
    double c = 0;
    if (sp == std::string_view::npos || !parse_double(rest.substr(0, sp), d) ||
        !parse_double(rest.substr(sp + 1), c) || d < 1 || c < 0 || d != std::floor(d) || c != std::floor(c))
      fail(Errc::validation, "malformed embedding header '" + line + "'");
    dim = static_cast<std::size_t>(d);
    count = static_cast<std::size_t>(c);
  }
  meta.dim = dim;

  std::vector<std::string> ids;
  std::vector<float> values;
  ids.reserve(count);
  values.reserve(count * dim);
  std::unordered_map<std::string, std::size_t> seen;
  for (std::size_t r = 0; r < count; ++r) {
    if (!std::getline(in, line))
      fail(Errc::truncated, "embedding file declares " + std::to_string(count) + " rows, found " + std::to_string(r));
    if (in.eof()) fail(Errc::truncated, "embedding row " + std::to_string(r + 1) + " lacks a newline terminator");
    std::string_view rest(line);
    std::size_t comma = rest.find(',');
    if (comma == std::string_view::npos || comma == 0)
      fail(Errc::dim_mismatch, "embedding row " + std::to_string(r + 1) + " has no values");
    std::string id(rest.substr(0, comma));
    if (!seen.emplace(id, r).second) fail(Errc::duplicate_id, "duplicate embedding id " + id);
    rest.remove_prefix(comma + 1);
    std::size_t fields = 0;
    while (true) {
      std::size_t next = rest.find(',');
      std::string_view tok = rest.substr(0, next);
      float v = 0.0f;
      if (!parse_float(tok, v)) {
        double dv = 0.0;
        if (parse_double(tok, dv) && !std::isfinite(dv))
          fail(Errc::non_finite, "embedding id " + id + " holds a non-finite value");
        std::string lowered(tok);
        for (char& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (lowered.find("nan") != std::string::npos || lowered.find("inf") != std::string::npos)
          fail(Errc::non_finite, "embedding id " + id + " holds a non-finite value");
        fail(Errc::validation, "embedding id " + id + ": malformed number '" + std::string(tok) + "'");
      }
      if (!std::isfinite(v)) fail(Errc::non_finite, "embedding id " + id + " holds a non-finite value");
      ++fields;
      if (fields > dim) break;
      values.push_back(v);
      if (next == std::string_view::npos) break;
      rest.remove_prefix(next + 1);
    }
    if (fields != dim)
      fail(Errc::dim_mismatch, "embedding id " + id + " has " + std::to_string(fields) + " values, header says " +
                                   std::to_string(dim));
    ids.push_back(std::move(id));
  }
  if (std::getline(in, line) && !line.empty())
    fail(Errc::validation, "embedding file has rows beyond the declared count");
  return EmbeddingStore(std::move(meta), std::move(ids), std::move(values));
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return load_embeddings(in, EncoderMeta{EncoderKind::precomputed, 0, path.filename().string(), {}, {}, {}});
}

void write_embeddings(std::ostream& out, const EmbeddingStore& store) {
  out << "EMB1 " << store.dim() << ' ' << store.size() << '\n';
  for (std::size_t r = 0; r < store.size(); ++r) {
    out << store.ids()[r];
    for (float v : store.row(r)) out << ',' << format_float(v);
    out << '\n';
  }
}

}  // namespace textrisk::encoder
