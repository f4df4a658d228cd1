// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "kspec/collision.hpp"
#include "kspec/types.hpp"

namespace kspec {

using json = nlohmann::json;

inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr const char* kCodeVersion = "kspec-0.1.0";

// Cache file or sidecar does not match what the reader expects (exit code 2).
class CacheError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// "KSPC", u32 version, u64 rows, u64 cols, row-major little-endian f64.
void write_matrix(const std::filesystem::path& path, const Mat& m);
Mat read_matrix(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
// Pretty JSON with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);

json to_json(const CollisionKernelSpec& spec);
json to_json(const HermiteBasis& basis);
json to_json(const CollisionGridParams& grid);
json to_json(const ConvergenceReport& c);

// Formats doubles with 17 significant digits so files round-trip exactly.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(const std::vector<std::string>& cells);
  std::string str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_text(path, text_); }
  static std::string num(double v);
  static std::string num(long long v) { return std::to_string(v); }

 private:
  size_t width_;
  std::string text_;
};

// Emitted files with content hashes plus input hashes and parameters.
class Manifest {
 public:
  void add_input(const std::string& name, const std::string& sha256) { inputs_[name] = sha256; }
  void set(const std::string& key, json value) { params_[key] = std::move(value); }
  // Records a file already written under out_dir.
  void add_file(const std::filesystem::path& out_dir, const std::string& rel);
  json to_json() const;
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

 private:
  json inputs_ = json::object();
  json params_ = json::object();
  std::vector<std::pair<std::string, std::string>> files_;
};

// Operator matrices keyed by a hash of (kernel spec, basis, grid, code version).
class OperatorCache {
 public:
  explicit OperatorCache(std::filesystem::path dir) : dir_(std::move(dir)) {}
  static std::string key(const json& identity);
  bool contains(const std::string& key) const;
  // Loads L, A, K and the sidecar; throws CacheError on version or identity mismatch.
  json load(const std::string& key, const json& identity, Mat& L) const;
  void store(const std::string& key, const json& identity, const Mat& L, const json& extra) const;
  std::filesystem::path matrix_path(const std::string& key) const { return dir_ / ("L-" + key + ".kspc"); }
  std::filesystem::path sidecar_path(const std::string& key) const { return dir_ / ("L-" + key + ".json"); }

 private:
  std::filesystem::path dir_;
};

}  // namespace kspec
