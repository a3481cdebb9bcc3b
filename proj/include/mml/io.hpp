#pragma once

#include <Eigen/Core>

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "mml/model.hpp"

namespace mml {

static_assert(std::endian::native == std::endian::little,
              "dataset files are little-endian; big-endian hosts are unsupported");

//! Shortest decimal that round-trips the double exactly.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e)
    throw std::invalid_argument("invalid real value '" + s + "'");
  return v;
}

inline long parse_long(const std::string& s) {
  long v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e)
    throw std::invalid_argument("invalid integer '" + s + "'");
  return v;
}

inline std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e)
    throw std::invalid_argument("invalid unsigned integer '" + s + "'");
  return v;
}

//! Flat key=value text: one pair per line, '#' starts a comment, blank lines
//! ignored, later duplicates override earlier ones.
using KvMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void apply_override(KvMap& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("override '" + assignment +
                                "' is not of the form key=value");
  const std::string key = detail::trim(assignment.substr(0, eq));
  const std::string value = detail::trim(assignment.substr(eq + 1));
  if (key.empty())
    throw std::invalid_argument("override '" + assignment + "' has an empty key");
  kv[key] = value;
}

inline KvMap parse_kv_text(const std::string& text) {
  KvMap kv;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  " is not of the form key = value");
    apply_override(kv, line);
  }
  return kv;
}

inline KvMap read_kv_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_kv_text(buf.str());
}

//! Model config file contents (keys: d, n, delta, theta_norm, theta_mode,
//! noise, seed).
struct ModelFileConfig {
  long d = 0;
  long n = 0;
  double delta = 0.0;
  double theta_norm = 0.0;
  ThetaMode theta_mode = ThetaMode::Axis;
  Noise noise = Noise::Gaussian;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

inline ModelFileConfig parse_model_config(const KvMap& kv) {
  ModelFileConfig cfg;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "d") cfg.d = parse_long(value);
      else if (key == "n") cfg.n = parse_long(value);
      else if (key == "delta") cfg.delta = parse_double(value);
      else if (key == "theta_norm") cfg.theta_norm = parse_double(value);
      else if (key == "theta_mode") cfg.theta_mode = parse_theta_mode(value);
      else if (key == "noise") cfg.noise = parse_noise(value);
      else if (key == "seed") { cfg.seed = parse_u64(value); cfg.seed_set = true; }
      else throw std::invalid_argument("unknown model config key '" + key + "'");
    } catch (const std::invalid_argument& ex) {
      throw std::invalid_argument("key '" + key + "': " + ex.what());
    }
  }
  if (kv.find("d") == kv.end()) throw std::invalid_argument("missing key 'd'");
  if (kv.find("n") == kv.end()) throw std::invalid_argument("missing key 'n'");
  return cfg;
}

inline std::string serialize_model_config(const ModelFileConfig& cfg) {
  std::ostringstream out;
  out << "d = " << cfg.d << "\n"
      << "n = " << cfg.n << "\n"
      << "delta = " << format_double(cfg.delta) << "\n"
      << "theta_norm = " << format_double(cfg.theta_norm) << "\n"
      << "theta_mode = " << theta_mode_name(cfg.theta_mode) << "\n"
      << "noise = " << noise_name(cfg.noise) << "\n";
  if (cfg.seed_set) out << "seed = " << cfg.seed << "\n";
  return out.str();
}

// Dataset container: magic "HMMX1", u32 d, u32 n, then d*n f64 column-major,
// all little-endian. Hidden labels go to a sidecar: magic "HMML1", u32 n,
// then n signed bytes in {-1,+1}.

inline void write_dataset(const std::string& path, const Eigen::MatrixXd& Y) {
  if (Y.rows() < 1 || Y.cols() < 1)
    throw std::invalid_argument("write_dataset: empty matrix");
  if (!Y.allFinite())
    throw std::invalid_argument("write_dataset: non-finite entries");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write("HMMX1", 5);
  const std::uint32_t d32 = static_cast<std::uint32_t>(Y.rows());
  const std::uint32_t n32 = static_cast<std::uint32_t>(Y.cols());
  f.write(reinterpret_cast<const char*>(&d32), 4);
  f.write(reinterpret_cast<const char*>(&n32), 4);
  f.write(reinterpret_cast<const char*>(Y.data()),
          static_cast<std::streamsize>(sizeof(double)) * Y.size());
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline Eigen::MatrixXd read_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open dataset file: " + path);
  char magic[5] = {};
  f.read(magic, 5);
  if (!f || std::memcmp(magic, "HMMX1", 5) != 0)
    throw std::invalid_argument("not a dataset file (bad magic): " + path);
  std::uint32_t d32 = 0, n32 = 0;
  f.read(reinterpret_cast<char*>(&d32), 4);
  f.read(reinterpret_cast<char*>(&n32), 4);
  if (!f || d32 < 1 || n32 < 1 ||
      static_cast<std::uint64_t>(d32) * n32 > (1ULL << 31))
    throw std::invalid_argument("corrupt dataset header: " + path);
  Eigen::MatrixXd Y(static_cast<long>(d32), static_cast<long>(n32));
  f.read(reinterpret_cast<char*>(Y.data()),
         static_cast<std::streamsize>(sizeof(double)) * Y.size());
  if (!f) throw std::invalid_argument("truncated dataset file: " + path);
  if (!Y.allFinite())
    throw std::invalid_argument("dataset has non-finite entries: " + path);
  return Y;
}

inline void write_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write("HMML1", 5);
  const std::uint32_t n32 = static_cast<std::uint32_t>(labels.size());
  f.write(reinterpret_cast<const char*>(&n32), 4);
  for (int v : labels) {
    const std::int8_t b = static_cast<std::int8_t>(v);
    f.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::vector<int> read_labels(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open labels file: " + path);
  char magic[5] = {};
  f.read(magic, 5);
  if (!f || std::memcmp(magic, "HMML1", 5) != 0)
    throw std::invalid_argument("not a labels file (bad magic): " + path);
  std::uint32_t n32 = 0;
  f.read(reinterpret_cast<char*>(&n32), 4);
  if (!f) throw std::invalid_argument("corrupt labels header: " + path);
  std::vector<int> labels(n32);
  for (std::uint32_t i = 0; i < n32; ++i) {
    std::int8_t b = 0;
    f.read(reinterpret_cast<char*>(&b), 1);
    labels[i] = b;
  }
  if (!f) throw std::invalid_argument("truncated labels file: " + path);
  return labels;
}

}  // namespace mml
