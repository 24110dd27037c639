#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace impactlab::cli {

/// Provenance record for one command run. Every output directory holds a
/// single manifest.json; runs are keyed by "<command>:<output file name>" so
/// several commands can share a directory.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  std::string started;
  std::string finished;

  nlohmann::ordered_json to_json() const;
};

/// UTC, second resolution, ISO 8601.
std::string utc_now();

/// 64-bit FNV-1a of the file contents, as 16 hex digits.
std::string file_digest(const std::filesystem::path& path);

/// Write through a temporary sibling and rename, so a failed run leaves no
/// partial file behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Merge `run` into the manifest of every directory holding one of its outputs.
void record_run(const RunManifest& run);

}  // namespace impactlab::cli
