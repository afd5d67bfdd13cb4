#pragma once

// Provenance of a pipeline run: one entry per command invocation, appended
// to a JSON file shared by all commands of the run.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace imlc::tools {

struct ManifestEntry {
  std::string command;
  std::map<std::string, std::filesystem::path> inputs;
  std::map<std::string, std::filesystem::path> outputs;
  std::map<std::string, std::uint64_t> seeds;
};

/// Appends `entry` to the manifest at `path`, stamping each file's
/// modification time. Throws ConfigError if a referenced file is missing.
void append_manifest(const std::filesystem::path& path, const ManifestEntry& entry);

}  // namespace imlc::tools
