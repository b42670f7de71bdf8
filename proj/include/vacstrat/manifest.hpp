#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace vacstrat {

inline constexpr const char* kToolVersion = "1.0.0";

std::string sha256_hex(std::string_view bytes);
// Throws InputError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

struct FileDigest {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string subcommand;
  std::map<std::string, std::string> config;  // resolved option values
  std::optional<std::uint64_t> seed;
  std::string started;   // UTC, ISO 8601; excluded from digests
  std::string finished;
  std::vector<FileDigest> inputs;   // as given on the command line
  std::vector<FileDigest> outputs;  // relative to the output directory
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
RunManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

std::string utc_timestamp();

}  // namespace vacstrat
