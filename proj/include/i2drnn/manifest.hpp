#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace i2drnn {

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Identifier of the source tree the binary was built from.
std::string source_id();
/// UTC, ISO 8601.
std::string utc_now();

inline constexpr const char* kManifestName = "run_manifest.json";

struct RunInfo {
  std::string command;
  std::string config;  // resolved config text
  std::uint64_t seed = 0;
  std::string started, finished;
  double wall_seconds = 0.0;
};

/// Lists every regular file under `dir` (recursively, except the manifest) with its hash.
void write_manifest(const std::filesystem::path& dir, const RunInfo& info);

struct ManifestCheck {
  bool ok = true;
  std::vector<std::string> problems;
};
ManifestCheck verify_manifest(const std::filesystem::path& dir);

}  // namespace i2drnn
