#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "exemplars.hpp"
#include "providers.hpp"

namespace thumbtruth {

// Project configuration file (JSON). Relative paths resolve against the
// directory holding the file. Credentials never live here.
struct ProjectConfig {
  std::filesystem::path path;  // empty for the built-in default
  std::string sha256;          // digest of the file bytes
  std::filesystem::path base_dir;

  std::vector<BackendConfig> backends;
  RetryPolicy retry;
  LanguageTable languages;
  std::string retrieval_description_source;  // backend that describes exemplar-pool videos
  std::string exemplar_generator;            // backend for thumbnail descriptions and explanations
  std::size_t embedder_dimension = 256;
  std::filesystem::path cache_dir;
  std::filesystem::path price_table;  // may be empty

  static ProjectConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ProjectConfig load(const std::filesystem::path& path);

  const BackendConfig& backend(std::string_view name) const;  // throws UnknownBackend
  // Backend that writes video descriptions for `classifier`.
  const BackendConfig& description_backend(std::string_view classifier) const;
};

// Backends are built once per name and shared.
class BackendRegistry {
 public:
  explicit BackendRegistry(const ProjectConfig& config) : config_(config) {}
  Backend& get(std::string_view name);

 private:
  const ProjectConfig& config_;
  std::map<std::string, std::shared_ptr<Backend>, std::less<>> built_;
};

std::unique_ptr<Embedder> make_embedder(const ProjectConfig& config);

}  // namespace thumbtruth
