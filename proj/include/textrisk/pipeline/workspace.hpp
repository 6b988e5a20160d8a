#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace textrisk::pipeline {

// Output directory plus manifest.json. Every artifact is recorded with its
// sha256, the command that wrote it, the run seed and the hashes of the
// inputs it was derived from. Reading an artifact verifies that the file and
// everything upstream of it are unchanged since it was written.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path dir);

  const std::filesystem::path& dir() const noexcept { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  bool has(const std::string& name) const;

  // Throws Errc::io when missing, Errc::stale_input when the file or an
  // upstream artifact changed after it was recorded.
  void require(const std::string& name) const;
  std::string read(const std::string& name) const;

  // Writes, hashes and records an artifact; inputs are artifact names or
  // "external:<path>" entries.
  void write(const std::string& name, const std::string& bytes, const std::string& command, std::uint64_t seed,
             const std::vector<std::string>& inputs);
  // Records an external input file under "external:<absolute path>".
  std::string external(const std::filesystem::path& file);

  std::string sha256_of(const std::string& name) const;
  const nlohmann::json& manifest() const noexcept { return manifest_; }
  void save() const;

 private:
  void check_upstream(const std::string& name, int depth) const;

  std::filesystem::path dir_;
  nlohmann::json manifest_;
};

}  // namespace textrisk::pipeline
