#include "geomatch/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <vector>

#include "geomatch/error.hpp"
#include "geomatch/numeric.hpp"
#include "json_util.hpp"

namespace geomatch {

namespace fs = std::filesystem;
using detail::ojson;

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string artifact_hash(const fs::path& path) {
  if (!fs::exists(path)) throw ArtifactError("missing artifact: " + path.string());
  if (!fs::is_directory(path)) return hash_hex(fnv1a64(detail::read_text(path)));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(path)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = fnv1a64("");
  for (const auto& f : files) {
    h = fnv1a64(fs::relative(f, path).generic_string(), h);
    h = fnv1a64(detail::read_text(f), h);
  }
  return hash_hex(h);
}

PipelineManifest PipelineManifest::load(const fs::path& file) {
  const auto doc = detail::parse_json(detail::read_text(file), "manifest " + file.string());
  PipelineManifest m(file);
  try {
    m.seed_ = doc.at("seed").get<std::uint64_t>();
    m.created_ = doc.value("created", std::string());
    for (const auto& [name, e] : doc.at("artifacts").items()) {
      m.entries_[name] = {e.at("path").get<std::string>(), e.at("hash").get<std::string>(),
                          e.value("updated", std::string())};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest " + file.string() + ": " + e.what());
  }
  return m;
}

PipelineManifest PipelineManifest::open(const fs::path& file) {
  if (fs::exists(file)) return load(file);
  PipelineManifest m(file);
  m.created_ = utc_now();
  return m;
}

void PipelineManifest::save() const {
  ojson artifacts = ojson::object();
  for (const auto& [name, e] : entries_) {
    artifacts[name] = ojson{{"path", e.path}, {"hash", e.hash}, {"updated", e.updated}};
  }
  ojson doc{{"format", "geomatch-manifest-v1"}, {"seed", seed_}, {"created", created_}, {"artifacts", artifacts}};
  if (!file_.parent_path().empty()) fs::create_directories(file_.parent_path());
  detail::write_text(file_, doc.dump(2) + "\n");
}

void PipelineManifest::record(const std::string& name, const fs::path& path) {
  const auto abs = fs::absolute(path).lexically_normal();
  const auto dir = fs::absolute(directory()).lexically_normal();
  auto rel = abs.lexically_relative(dir);
  const bool inside = !rel.empty() && *rel.begin() != "..";
  entries_[name] = {inside ? rel.generic_string() : abs.generic_string(), artifact_hash(abs), utc_now()};
}

fs::path PipelineManifest::absolute(const ManifestEntry& entry) const {
  const fs::path p(entry.path);
  return p.is_absolute() ? p : directory() / p;
}

fs::path PipelineManifest::resolve(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw ArtifactError("manifest has no " + name + " artifact");
  const auto path = absolute(it->second);
  if (artifact_hash(path) != it->second.hash) throw ArtifactError(name + " artifact changed since it was recorded");
  return path;
}

std::optional<fs::path> PipelineManifest::resolve_optional(const std::string& name) const {
  if (!has(name)) return std::nullopt;
  return resolve(name);
}

void PipelineManifest::verify() const {
  for (const auto& [name, entry] : entries_) resolve(name);
}

}  // namespace geomatch
