#include "letf/artifacts.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <memory>
#include <nlohmann/json.hpp>
#include <sstream>

#include "letf/error.hpp"

#ifndef LETF_VERSION
#define LETF_VERSION "unknown"
#endif

namespace letf {

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) x = 0.0;  // drop the sign of -0
  std::array<char, 32> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), r.ptr);
}

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1)
    throw Error("SHA-256 computation failed", ExitCode::validation);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(data);
}

std::string version_string() { return LETF_VERSION; }

ArtifactWriter::ArtifactWriter(std::filesystem::path dir, std::string command,
                               std::string config_hash, std::uint64_t seed)
    : dir_(std::move(dir)),
      command_(std::move(command)),
      config_hash_(std::move(config_hash)),
      seed_(seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

void ArtifactWriter::write(const std::string& name, const std::string& contents) {
  const auto p = dir_ / name;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ConfigError("write failed for " + p.string());
  files_.emplace_back(name, sha256_hex(contents));
}

void ArtifactWriter::record(const std::string& name) {
  files_.emplace_back(name, sha256_file(dir_ / name));
}

void ArtifactWriter::add_note(const std::string& key, const std::string& value) {
  notes_.emplace_back(key, value);
}

void ArtifactWriter::finish() const {
  nlohmann::ordered_json j;
  j["command"] = command_;
  j["config_sha256"] = config_hash_;
  j["seed"] = seed_;
  j["version"] = version_string();
  auto& files = j["files"];
  files = nlohmann::ordered_json::array();
  for (const auto& [name, hash] : files_) files.push_back({{"name", name}, {"sha256", hash}});
  if (!notes_.empty()) {
    auto& notes = j["notes"];
    for (const auto& [k, v] : notes_) notes[k] = v;
  }
  const auto p = dir_ / "manifest.json";
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

}  // namespace letf
