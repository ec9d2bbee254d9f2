#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace shrinkfit {

inline constexpr const char* kVersion = "0.1.0";

// Provenance record emitted next to every output file.
struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;  // ordered echo
  std::uint64_t seed = 0;
  std::string version = kVersion;
  std::vector<std::pair<std::string, std::string>> inputs;  // path -> digest
  std::string started_at;
  std::string finished_at;

  void add_input(const std::string& path);  // digests the raw bytes
  void stamp_start();
  void stamp_finish();
};

// FNV-1a 64-bit digest of a file's raw bytes, as a 16-hex-digit string.
std::string fnv1a64_file(const std::string& path);

std::string manifest_path_for(const std::string& output_path);

// Writes the manifest as JSON at manifest_path_for(output_path).
void write_manifest(const std::string& output_path, const RunManifest& manifest);

}  // namespace shrinkfit
