#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rarenet {

/// Record written next to the outputs of every command that produces files.
struct RunManifest {
  std::string command;
  /// Resolved configuration as key -> value text.
  std::map<std::string, std::string> config;
  /// File name -> SHA-256, for inputs and outputs.
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::optional<std::uint64_t> seed;
  std::string tool_version;
  double wall_clock_seconds = 0.0;

  /// SHA-256 over everything except the wall-clock time.
  std::string digest() const;
};

std::string manifest_json(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Runs one command line (without the program name). Exit codes: 0 success,
/// 1 runtime failure, 2 usage or configuration error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string tool_version();

}  // namespace rarenet
