#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace foldcore::cli {

enum ExitCode : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kNumerical = 3,
};

// Runs one command. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Independent stream seeds (data, model init, shuffling) from one base seed.
uint64_t derive_seed(uint64_t base, uint64_t stream);

struct RunManifest {
  std::string command;
  uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::map<std::string, std::string> results;
  std::string version;
  double wall_time_s = 0.0;

  // Hash of command, seed and config; identical flags give identical ids.
  std::string run_id() const;
  // Flat key=value lines, config keys prefixed "config.", results "result.".
  void write(const std::string& path, const std::string& csv_path) const;
};

// Reads a manifest back as key → value.
std::map<std::string, std::string> read_manifest(const std::string& path);

}  // namespace foldcore::cli
