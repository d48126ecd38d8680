#include "config.hpp"

#include <set>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

ProjectConfig ProjectConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  ProjectConfig c;
  c.base_dir = base_dir;
  try {
    for (const auto& b : j.value("backends", json::array())) c.backends.push_back(backend_config_from_json(b, base_dir));
    if (j.contains("retry")) {
      const auto& r = j.at("retry");
      c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
      c.retry.base_delay_ms = r.value("base_delay_ms", c.retry.base_delay_ms);
      c.retry.max_delay_ms = r.value("max_delay_ms", c.retry.max_delay_ms);
    }
    if (j.contains("language_families")) c.languages = LanguageTable::from_json(j.at("language_families"));
    c.retrieval_description_source = j.value("retrieval_description_source", std::string());
    c.exemplar_generator = j.value("exemplar_generator", std::string());
    if (j.contains("embedder")) c.embedder_dimension = j.at("embedder").value("dimension", c.embedder_dimension);
    c.cache_dir = resolve(base_dir, j.value("cache_dir", std::string("cache")));
    c.price_table = resolve(base_dir, j.value("price_table", std::string()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigurationError, e.what());
  }
  std::set<std::string> names;
  for (const auto& b : c.backends) {
    if (!names.insert(b.name).second) throw Error(ErrorCode::ConfigurationError, "backend listed twice: " + b.name);
  }
  for (const auto& b : c.backends) {
    if (b.description_source != "self" && !names.count(b.description_source)) {
      throw Error(ErrorCode::ConfigurationError,
                  b.name + ": description_source '" + b.description_source + "' is not a configured backend");
    }
  }
  if (c.embedder_dimension == 0) throw Error(ErrorCode::ConfigurationError, "embedder dimension must be positive");
  return c;
}

ProjectConfig ProjectConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::ConfigurationError, "config not found: " + path.string());
  }
  auto text = read_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigurationError, path.string() + ": " + e.what());
  }
  auto c = from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  c.path = path;
  c.sha256 = sha256_hex(text);
  return c;
}

const BackendConfig& ProjectConfig::backend(std::string_view name) const {
  for (const auto& b : backends) {
    if (b.name == name) return b;
  }
  throw Error(ErrorCode::UnknownBackend, std::string(name));
}

const BackendConfig& ProjectConfig::description_backend(std::string_view classifier) const {
  const auto& b = backend(classifier);
  return b.description_source == "self" ? b : backend(b.description_source);
}

Backend& BackendRegistry::get(std::string_view name) {
  auto it = built_.find(name);
  if (it != built_.end()) return *it->second;
  auto backend = create_backend(config_.backend(name));
  auto& ref = *backend;
  built_.emplace(std::string(name), std::move(backend));
  return ref;
}

std::unique_ptr<Embedder> make_embedder(const ProjectConfig& config) {
  return std::make_unique<HashEmbedder>(config.embedder_dimension);
}

}  // namespace thumbtruth
