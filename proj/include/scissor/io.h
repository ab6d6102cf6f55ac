#pragma once

// Persistence: atomic file writes, content hashes, CSV tables, design JSON
// and run manifests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "scissor/optimize.h"

namespace scissor::io {

inline constexpr const char* kToolVersion = "1.0.0";

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes to a temporary sibling and renames it over `path`, so readers see
// either the old file or the complete new one. Creates parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// 64-bit FNV-1a.
uint64_t fnv1a64(std::string_view data);
std::string hex64(uint64_t v);

// Shortest form that still round-trips: %.17g, with nan / inf / -inf.
std::string format_double(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void AddRow(std::vector<std::string> row);
  // Comma-separated, '\n' line ends, fields with commas or quotes quoted.
  std::string ToCsv() const;
};

// JSON text with two-space indent and a trailing newline.
std::string dump(const nlohmann::json& j);

// Design file: the physical parameters needed to re-simulate, the raw
// optimum, loss trace and a copy of the settings that produced it.
nlohmann::json run_result_to_json(const optimize::RunResult& r,
                                  const nlohmann::json& config_echo = nlohmann::json::object());
// Inverse of run_result_to_json for the fields it writes. Throws IoError.
optimize::RunResult run_result_from_json(const nlohmann::json& j);

struct Manifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> input_hashes;   // path -> fnv1a hex
  std::map<std::string, std::string> output_hashes;  // file name -> fnv1a hex
  uint64_t seed = 0;
  std::string started;
  std::string finished;
};

nlohmann::json manifest_to_json(const Manifest& m);

// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace scissor::io
