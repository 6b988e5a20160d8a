#pragma once

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "textrisk/common/exec.hpp"

namespace textrisk::encoder {

inline constexpr std::size_t kDefaultDim = 768;

enum class EncoderKind { hashed, precomputed };

std::string_view kind_name(EncoderKind kind);
EncoderKind parse_kind(std::string_view name);

struct EncoderMeta {
  EncoderKind kind = EncoderKind::hashed;
  std::size_t dim = kDefaultDim;
  std::string provenance;
  std::optional<int> layer_count;
  std::optional<int> hidden_size;
  std::optional<int> attention_heads;

  nlohmann::json to_json() const;
  static EncoderMeta from_json(const nlohmann::json& j);
};

// Immutable id -> vector map. Rows keep insertion order (the file order).
class EmbeddingStore {
 public:
  EmbeddingStore(EncoderMeta meta, std::vector<std::string> ids, std::vector<float> values);

  const EncoderMeta& meta() const noexcept { return meta_; }
  std::size_t dim() const noexcept { return meta_.dim; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  bool contains(std::string_view id) const { return index_.count(std::string(id)) > 0; }
  // Throws Errc::unknown_id.
  std::size_t row_of(std::string_view id) const;
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * meta_.dim, meta_.dim}; }
  std::span<const float> vector(std::string_view id) const { return row(row_of(id)); }

 private:
  EncoderMeta meta_;
  std::vector<std::string> ids_;
  std::vector<float> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Lowercased word unigrams and bigrams, FNV-1a 64 hashed: index = h mod dim,
// sign negative when bit 63 is set; accumulated then L2-normalized.
std::vector<double> hashed_encode(std::string_view text, std::size_t dim = kDefaultDim);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

EmbeddingStore hashed_store(std::span<const std::string> ids, std::span<const std::string> texts,
                            std::size_t dim = kDefaultDim, Exec exec = Exec::parallel);

// EMB1 format: "EMB1 <dim> <count>\n" then "<id>,<f0>,...,<f_{dim-1}>\n" rows.
// Errors: Errc::dim_mismatch, Errc::duplicate_id, Errc::non_finite,
// Errc::truncated (fewer rows than declared, or missing final newline), and
// Errc::validation for malformed headers or numbers.
EmbeddingStore load_embeddings(std::istream& in, EncoderMeta meta = {EncoderKind::precomputed});
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void write_embeddings(std::ostream& out, const EmbeddingStore& store);

}  // namespace textrisk::encoder
