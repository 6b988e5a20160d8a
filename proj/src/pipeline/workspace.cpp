#include "textrisk/pipeline/workspace.hpp"

#include "textrisk/common/digest.hpp"
#include "textrisk/common/error.hpp"

namespace textrisk::pipeline {

namespace fs = std::filesystem;

Workspace::Workspace(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(Errc::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
  const fs::path m = dir_ / "manifest.json";
  if (fs::exists(m)) {
    try {
      manifest_ = nlohmann::json::parse(read_file(m));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::validation, "manifest.json is not valid JSON: " + std::string(e.what()));
    }
  } else {
    manifest_ = {{"format", "textrisk-manifest/1"}, {"artifacts", nlohmann::json::object()}};
  }
}

bool Workspace::has(const std::string& name) const {
  return manifest_["artifacts"].contains(name) && fs::exists(path(name));
}

std::string Workspace::sha256_of(const std::string& name) const {
  if (!manifest_["artifacts"].contains(name)) fail(Errc::io, "artifact '" + name + "' has not been produced");
  return manifest_["artifacts"][name]["sha256"].get<std::string>();
}

void Workspace::check_upstream(const std::string& name, int depth) const {
  if (depth > 64) fail(Errc::validation, "manifest has a dependency cycle at " + name);
  const auto& entry = manifest_["artifacts"][name];
  for (auto it = entry["inputs"].begin(); it != entry["inputs"].end(); ++it) {
    const std::string& input = it.key();
    const std::string recorded = it.value().get<std::string>();
    std::string current;
    if (input.rfind("external:", 0) == 0) {
      const fs::path file = input.substr(9);
      if (!fs::exists(file)) continue;  // external inputs may be moved after ingestion
      current = sha256_file(file);
    } else {
      if (!manifest_["artifacts"].contains(input))
        fail(Errc::stale_input, name + " was built from " + input + ", which is no longer recorded");
      current = manifest_["artifacts"][input]["sha256"].get<std::string>();
      if (fs::exists(path(input)) && sha256_file(path(input)) != current)
        fail(Errc::stale_input, name + " depends on " + input + ", which was modified after it was written");
      check_upstream(input, depth + 1);
    }
    if (current != recorded)
      fail(Errc::stale_input, name + " is stale: its input " + input + " changed after it was written; rerun " +
                                  entry["command"].get<std::string>());
  }
}

void Workspace::require(const std::string& name) const {
  if (!manifest_["artifacts"].contains(name))
    fail(Errc::io, "missing artifact '" + name + "' in " + dir_.string() + "; run the producing command first");
  if (!fs::exists(path(name))) fail(Errc::io, "artifact file " + path(name).string() + " is missing");
  if (sha256_file(path(name)) != sha256_of(name))
    fail(Errc::stale_input, "artifact " + name + " was modified after it was written");
  check_upstream(name, 0);
}

std::string Workspace::read(const std::string& name) const {
  require(name);
  return read_file(path(name));
}

std::string Workspace::external(const fs::path& file) {
  if (!fs::exists(file)) fail(Errc::io, "input file " + file.string() + " does not exist");
  return "external:" + fs::absolute(file).lexically_normal().string();
}

void Workspace::write(const std::string& name, const std::string& bytes, const std::string& command,
                      std::uint64_t seed, const std::vector<std::string>& inputs) {
  nlohmann::json in = nlohmann::json::object();
  for (const auto& i : inputs) {
    if (i.rfind("external:", 0) == 0) {
      in[i] = sha256_file(i.substr(9));
    } else {
      in[i] = sha256_of(i);
    }
  }
  write_file(path(name), bytes);
  manifest_["artifacts"][name] = {{"sha256", sha256_hex(bytes)}, {"command", command}, {"seed", seed}, {"inputs", in}};
  save();
}

void Workspace::save() const { write_file(dir_ / "manifest.json", manifest_.dump(2) + "\n"); }

}  // namespace textrisk::pipeline
