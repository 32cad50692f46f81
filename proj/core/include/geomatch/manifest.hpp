#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace geomatch {

/// Content hash of a file, or of every regular file under a directory
/// (relative names and bytes, in sorted order).
std::string artifact_hash(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative to the manifest directory when inside it
  std::string hash;
  std::string updated;  // UTC, ISO-8601
};

/// Index of pipeline artifacts. Stages read their inputs through `resolve`,
/// which refuses files whose content no longer matches the recorded hash.
class PipelineManifest {
 public:
  PipelineManifest() = default;
  explicit PipelineManifest(std::filesystem::path file) : file_(std::move(file)) {}

  static PipelineManifest load(const std::filesystem::path& file);
  /// Loads `file` if it exists, otherwise starts an empty manifest there.
  static PipelineManifest open(const std::filesystem::path& file);
  void save() const;

  const std::filesystem::path& file() const noexcept { return file_; }
  std::filesystem::path directory() const { return file_.parent_path(); }

  std::uint64_t seed() const noexcept { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  const std::string& created() const noexcept { return created_; }

  /// Records `path` under `name` with its current hash and a timestamp.
  void record(const std::string& name, const std::filesystem::path& path);
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  const std::map<std::string, ManifestEntry>& entries() const noexcept { return entries_; }
  /// Absolute path of `name`, verified against its hash.
  std::filesystem::path resolve(const std::string& name) const;
  std::optional<std::filesystem::path> resolve_optional(const std::string& name) const;
  /// Throws ArtifactError naming the first missing or modified artifact.
  void verify() const;

 private:
  std::filesystem::path absolute(const ManifestEntry& entry) const;

  std::filesystem::path file_;
  std::uint64_t seed_ = 1;
  std::string created_;
  std::map<std::string, ManifestEntry> entries_;
};

}  // namespace geomatch
