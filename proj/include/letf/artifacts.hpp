#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace letf {

// Shortest text that parses back to the same double.
std::string format_number(double x);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Build identifier compiled in from `git describe`.
std::string version_string();

// Writes files into one output directory and records them in manifest.json
// together with the config hash, seed and version. No timestamps, so a re-run
// with the same inputs reproduces every byte.
class ArtifactWriter {
 public:
  ArtifactWriter(std::filesystem::path dir, std::string command, std::string config_hash,
                 std::uint64_t seed);

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path path(const std::string& name) const { return dir_ / name; }
  void write(const std::string& name, const std::string& contents);
  // Records a file something else already wrote into dir().
  void record(const std::string& name);
  void add_note(const std::string& key, const std::string& value);
  void finish() const;

 private:
  std::filesystem::path dir_;
  std::string command_;
  std::string config_hash_;
  std::uint64_t seed_;
  std::vector<std::pair<std::string, std::string>> files_;  // name, sha256
  std::vector<std::pair<std::string, std::string>> notes_;
};

}  // namespace letf
