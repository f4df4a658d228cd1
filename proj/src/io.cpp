// SPDX-License-Identifier: Apache-2.0
#include "kspec/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace kspec {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "cache files assume a little-endian host");

namespace {

template <class T>
void put(std::string& buf, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  buf.append(b, sizeof(T));
}

template <class T>
T get(const std::string& buf, size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw CacheError("matrix file truncated");
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_matrix(const fs::path& path, const Mat& m) {
  std::string buf = "KSPC";
  put<std::uint32_t>(buf, kCacheVersion);
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(buf, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(buf, m(i, j));
  write_text(path, buf);
}

Mat read_matrix(const fs::path& path) {
  const std::string buf = read_text(path);
  if (buf.size() < 4 || buf.compare(0, 4, "KSPC") != 0) throw CacheError(path.string() + ": bad magic");
  size_t pos = 4;
  const auto version = get<std::uint32_t>(buf, pos);
  if (version != kCacheVersion)
    throw CacheError(path.string() + ": cache version " + std::to_string(version) + ", expected " +
                     std::to_string(kCacheVersion));
  const auto rows = get<std::uint64_t>(buf, pos);
  const auto cols = get<std::uint64_t>(buf, pos);
  if (buf.size() != pos + rows * cols * sizeof(double)) throw CacheError(path.string() + ": size mismatch");
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>(buf, pos);
  return m;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

json to_json(const CollisionKernelSpec& spec) {
  return {{"gamma", spec.gamma},
          {"s", spec.s},
          {"d", spec.d},
          {"b_amplitude", spec.b_amplitude},
          {"theta_floor", spec.theta_floor},
          {"backend", backend_name(spec.backend)},
          {"cutoff", spec.cutoff}};
}

json to_json(const HermiteBasis& basis) {
  json idx = json::array();
  for (Eigen::Index k = 0; k < basis.index_set.rows(); ++k) {
    json a = json::array();
    for (Eigen::Index i = 0; i < basis.index_set.cols(); ++i) a.push_back(basis.index_set(k, i));
    idx.push_back(a);
  }
  return {{"dim_v", basis.dim_v}, {"max_degree", basis.max_degree}, {"quad_order", basis.quad_order}, {"index_set", idx}};
}

json to_json(const CollisionGridParams& g) {
  return {{"n_center", g.n_center},       {"n_radial", g.n_radial},         {"n_polar", g.n_polar},
          {"n_azimuth", g.n_azimuth},     {"n_sigma_azimuth", g.n_sigma_azimuth}, {"gl_per_panel", g.gl_per_panel},
          {"theta_floor", g.theta_floor}, {"antipodal_half", g.antipodal_half}};
}

json to_json(const ConvergenceReport& c) {
  return {{"checked", c.checked}, {"converged", c.converged}, {"max_change", c.max_change}, {"tolerance", c.tolerance}};
}

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) {
  for (size_t i = 0; i < header.size(); ++i) text_ += (i ? "," : "") + header[i];
  text_ += "\n";
}

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) throw ConfigError("csv row width mismatch");
  for (size_t i = 0; i < cells.size(); ++i) text_ += (i ? "," : "") + cells[i];
  text_ += "\n";
  return *this;
}

std::string CsvWriter::num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

void Manifest::add_file(const fs::path& out_dir, const std::string& rel) {
  for (auto& f : files_)
    if (f.first == rel) {
      f.second = sha256_file(out_dir / rel);
      return;
    }
  files_.emplace_back(rel, sha256_file(out_dir / rel));
}

json Manifest::to_json() const {
  json files = json::array();
  for (const auto& [name, hash] : files_) files.push_back({{"path", name}, {"sha256", hash}});
  return {{"code_version", kCodeVersion}, {"inputs", inputs_}, {"parameters", params_}, {"files", files}};
}

std::string OperatorCache::key(const json& identity) { return sha256_hex(identity.dump()).substr(0, 32); }

bool OperatorCache::contains(const std::string& key) const {
  return fs::exists(matrix_path(key)) && fs::exists(sidecar_path(key));
}

json OperatorCache::load(const std::string& key, const json& identity, Mat& L) const {
  const json side = json::parse(read_text(sidecar_path(key)));
  if (side.value("cache_version", 0u) != kCacheVersion) throw CacheError("cache sidecar version mismatch for " + key);
  if (side.at("identity") != identity) throw CacheError("cache sidecar identity mismatch for " + key);
  L = read_matrix(matrix_path(key));
  return side;
}

void OperatorCache::store(const std::string& key, const json& identity, const Mat& L, const json& extra) const {
  fs::create_directories(dir_);
  write_matrix(matrix_path(key), L);
  json side = extra;
  side["cache_version"] = kCacheVersion;
  side["identity"] = identity;
  write_json(sidecar_path(key), side);
}

}  // namespace kspec
