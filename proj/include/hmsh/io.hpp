#pragma once

#include "hmsh/error.hpp"
#include "hmsh/linalg.hpp"
#include "hmsh/model.hpp"
#include "hmsh/rng.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace hmsh {

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> columns;
  Matrix values;  // rows x columns
};

// Shortest text that parses back to the same double.
inline std::string shortest(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size();
}

// Numeric CSV with a header row. A first column named date, time or period
// is treated as a label and dropped. Empty lines are skipped.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path + "'");
  std::string line;
  CsvTable t;
  bool label_column = false;
  std::vector<std::vector<double>> rows;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split(line, ',');
    if (t.columns.empty()) {
      std::string first = cells.front();
      for (auto& c : first) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      label_column = first == "date" || first == "time" || first == "period";
      t.columns.assign(cells.begin() + (label_column ? 1 : 0), cells.end());
      if (t.columns.empty()) throw DataError(path + ": no data columns");
      continue;
    }
    if (cells.size() != t.columns.size() + (label_column ? 1 : 0))
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(t.columns.size() + (label_column ? 1 : 0)) + " fields, found " +
                      std::to_string(cells.size()));
    std::vector<double> row;
    for (std::size_t j = label_column ? 1 : 0; j < cells.size(); ++j) {
      double v;
      if (!parse_double(cells[j], v) || !std::isfinite(v))
        throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric value '" + cells[j] + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw DataError(path + ": empty file");
  if (rows.empty()) throw DataError(path + ": no observations");
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return t;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& columns, const Matrix& values) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  for (std::size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << "\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << values(i, j);
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// Flat dotted key = value configuration

class Config {
 public:
  // Lines "key = value"; '#' starts a comment; later keys override earlier ones.
  static Config parse(const std::string& text, const std::string& origin = "<config>") {
    Config c;
    std::istringstream is(text);
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      if (trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config", origin + ":" + std::to_string(n) + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw ConfigError("config", origin + ":" + std::to_string(n) + ": empty key");
      c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = parse(ss.str(), path);
    c.base_dir_ = std::filesystem::absolute(std::filesystem::path(path)).parent_path().string();
    return c;
  }

  // Applies "key=value".
  void set_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || trim(text.substr(0, eq)).empty())
      throw ConfigError("config", "override '" + text + "' is not key=value");
    set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  // Getters record the value actually used (including defaults) so the
  // resolved configuration can be echoed into the manifest.
  std::string get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? fallback : it->second;
    used_[key] = v;
    return v;
  }

  std::string require(const std::string& key) const {
    if (!has(key)) throw ConfigError(key, "required setting is missing");
    return get(key, "");
  }

  int get_int(const std::string& key, int fallback) const {
    const std::string v = get(key, std::to_string(fallback));
    std::size_t pos = 0;
    try {
      const long long x = std::stoll(v, &pos);
      if (pos != v.size() || x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) throw 0;
      return static_cast<int>(x);
    } catch (...) {
      throw ConfigError(key, "expected an integer, got '" + v + "'");
    }
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const std::string v = get(key, std::to_string(fallback));
    std::size_t pos = 0;
    try {
      if (!v.empty() && v[0] == '-') throw 0;
      const unsigned long long x = std::stoull(v, &pos);
      if (pos != v.size()) throw 0;
      return x;
    } catch (...) {
      throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
    }
  }

  double get_double(const std::string& key, double fallback) const {
    const std::string v = get(key, shortest(fallback));
    double x;
    if (!parse_double(v, x)) throw ConfigError(key, "expected a number, got '" + v + "'");
    return x;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    std::string v = get(key, fallback ? "true" : "false");
    for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key, "expected true or false, got '" + v + "'");
  }

  // Comma-separated list; commas inside parentheses do not split, so
  // "HMSH(20), HMSH(3,stationary)" has two items.
  std::vector<std::string> get_list(const std::string& key, const std::string& fallback) const {
    const std::string v = get(key, fallback);
    if (trim(v).empty()) return {};
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : v + ",") {
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (c == ',' && depth == 0) {
        if (trim(cur).empty()) throw ConfigError(key, "empty list item in '" + v + "'");
        out.push_back(trim(cur));
        cur.clear();
        continue;
      }
      cur += c;
    }
    if (depth != 0) throw ConfigError(key, "unbalanced parentheses in '" + v + "'");
    return out;
  }

  std::vector<int> get_int_list(const std::string& key, const std::string& fallback) const {
    std::vector<int> out;
    for (const auto& item : get_list(key, fallback)) {
      std::size_t pos = 0;
      try {
        out.push_back(std::stoi(item, &pos));
        if (pos != item.size()) throw 0;
      } catch (...) {
        throw ConfigError(key, "expected integers, got '" + item + "'");
      }
    }
    return out;
  }

  // Resolves a path setting relative to the directory of the config file.
  std::string get_path(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    std::string v = it == values_.end() ? fallback : it->second;
    if (!v.empty()) {
      std::filesystem::path p(v);
      if (p.is_relative() && !base_dir_.empty()) p = std::filesystem::path(base_dir_) / p;
      v = std::filesystem::absolute(p).lexically_normal().string();
    }
    used_[key] = v;
    return v;
  }

  // Keys present in the file/overrides that no getter read, excluding meta.*.
  std::vector<std::string> unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
      if (!used_.count(k) && k.rfind("meta.", 0) != 0) out.push_back(k);
    return out;
  }

  // Canonical text of the resolved settings: sorted "key = value" lines,
  // meta.* excluded.
  std::string canonical() const {
    std::ostringstream os;
    for (const auto& [k, v] : used_)
      if (k.rfind("meta.", 0) != 0) os << k << " = " << v << "\n";
    return os.str();
  }

  std::uint64_t hash() const { return fnv1a(canonical()); }

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, std::string> used_;
  std::string base_dir_;
};

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

// Manifest: meta.* provenance lines followed by the resolved configuration,
// so the file itself can be passed back with --config. Re-running ignores
// meta.* keys.
inline void write_manifest(const std::string& dir, const std::string& command, const Config& cfg,
                           const std::string& version, double wall_seconds, const std::vector<std::string>& outputs) {
  std::ofstream out(std::filesystem::path(dir) / "manifest.cfg");
  if (!out) throw Error("cannot write manifest in '" + dir + "'");
  out << "# rerun: hmsh " << command << " --config <this file>\n";
  out << "meta.command = " << command << "\n";
  out << "meta.version = " << version << "\n";
  out << "meta.config_hash = " << hex64(cfg.hash()) << "\n";
  out << "meta.wall_seconds = " << std::fixed << std::setprecision(3) << wall_seconds << "\n";
  out << "meta.outputs = ";
  for (std::size_t i = 0; i < outputs.size(); ++i) out << (i ? ", " : "") << outputs[i];
  out << "\n\n" << cfg.canonical();
}

// ---------------------------------------------------------------------------
// Columnar binary posterior
//
// Native-endian layout: 8-byte magic "HMSHPOS1", a header of int64 values,
// then one contiguous column per parameter block laid out draw-major.

namespace detail {

class BinWriter {
 public:
  explicit BinWriter(std::ostream& os) : os_(os) {}
  void i64(std::int64_t v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void f64(double v) { os_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void mat(const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) f64(m(i, j));
  }
  void vec(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }

 private:
  std::ostream& os_;
};

class BinReader {
 public:
  explicit BinReader(std::istream& is) : is_(is) {}
  std::int64_t i64() {
    std::int64_t v;
    read(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    read(&v, sizeof v);
    return v;
  }
  Matrix mat(Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = f64();
    return m;
  }
  Vector vec(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
    return v;
  }

 private:
  void read(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) throw DataError("posterior file truncated");
  }
  std::istream& is_;
};

}  // namespace detail

inline void write_posterior(const std::string& path, const PosteriorSample& s) {
  if (s.empty()) throw ParameterError("cannot write an empty posterior");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path + "'");
  const auto& f = s.draws.front();
  const std::int64_t n = f.shocks(), k = f.a.cols(), m = s.volatility.regimes;
  const std::int64_t procs = static_cast<std::int64_t>(f.paths.size());
  const std::int64_t t_len = f.paths.empty() ? 0 : static_cast<std::int64_t>(f.paths.front().size());
  const std::int64_t markov = f.transitions.empty() ? 0 : 1;
  const std::int64_t ga = f.shrinkage_a.gamma.size(), gb = f.shrinkage_b.gamma.size();
  os.write("HMSHPOS1", 8);
  detail::BinWriter w(os);
  for (std::int64_t v : {n, k, m, procs, t_len, static_cast<std::int64_t>(s.size()), std::int64_t{s.lag_order},
                         std::int64_t{s.deterministic_count}, std::int64_t{s.burn_in}, std::int64_t{s.thinning},
                         static_cast<std::int64_t>(s.volatility.variant), std::int64_t{s.volatility.sparse}, markov, ga, gb,
                         s.diagnostics.sweeps, s.diagnostics.occupancy_redraws, s.diagnostics.occupancy_fallbacks,
                         static_cast<std::int64_t>(s.volatility.breakpoints.size())})
    w.i64(v);
  for (int b : s.volatility.breakpoints) w.i64(b);
  for (const auto& d : s.draws) w.mat(d.b0);
  for (const auto& d : s.draws) w.mat(d.a);
  for (const auto& d : s.draws)
    for (const auto& v : d.variances) w.vec(v);
  for (const auto& d : s.draws)
    for (int p : d.process_of_shock) w.i64(p);
  for (const auto& d : s.draws)
    for (const auto& path : d.paths)
      for (int r : path) w.i64(r);
  if (markov) {
    for (const auto& d : s.draws)
      for (const auto& tp : d.transitions) w.mat(tp);
    for (const auto& d : s.draws)
      for (const auto& init : d.initials) w.vec(init);
  }
  for (const ShrinkageState ParameterState::*field : {&ParameterState::shrinkage_a, &ParameterState::shrinkage_b}) {
    for (const auto& d : s.draws) w.vec((d.*field).gamma);
    for (const auto& d : s.draws) w.vec((d.*field).local);
    for (const auto& d : s.draws) w.f64((d.*field).global);
  }
  for (const auto& d : s.draws)
    for (const auto& p : d.variance_posterior) w.vec(p.scales);
  for (const auto& d : s.draws)
    for (const auto& p : d.variance_posterior) w.vec(p.shapes);
  if (!os) throw Error("failed writing '" + path + "'");
}

inline PosteriorSample read_posterior(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open posterior file '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "HMSHPOS1", 8) != 0) throw DataError("'" + path + "' is not a posterior file");
  detail::BinReader r(is);
  const auto n = r.i64(), k = r.i64(), m = r.i64(), procs = r.i64(), t_len = r.i64(), draws = r.i64();
  PosteriorSample s;
  s.lag_order = static_cast<int>(r.i64());
  s.deterministic_count = static_cast<int>(r.i64());
  s.burn_in = static_cast<int>(r.i64());
  s.thinning = static_cast<int>(r.i64());
  s.volatility.variant = static_cast<VolatilityVariant>(r.i64());
  s.volatility.sparse = r.i64() != 0;
  const bool markov = r.i64() != 0;
  const auto ga = r.i64(), gb = r.i64();
  s.diagnostics.sweeps = r.i64();
  s.diagnostics.occupancy_redraws = r.i64();
  s.diagnostics.occupancy_fallbacks = r.i64();
  const auto nbreaks = r.i64();
  if (n < 1 || k < 0 || m < 1 || procs < 0 || t_len < 0 || draws < 1 || nbreaks < 0 || n > 10000 || m > 10000)
    throw DataError("corrupt posterior header in '" + path + "'");
  for (std::int64_t i = 0; i < nbreaks; ++i) s.volatility.breakpoints.push_back(static_cast<int>(r.i64()));
  s.volatility.regimes = static_cast<int>(m);
  s.draws.resize(static_cast<std::size_t>(draws));
  for (auto& d : s.draws) d.b0 = r.mat(n, n);
  for (auto& d : s.draws) d.a = r.mat(n, k);
  for (auto& d : s.draws)
    for (std::int64_t i = 0; i < n; ++i) d.variances.push_back(r.vec(m));
  for (auto& d : s.draws)
    for (std::int64_t i = 0; i < n; ++i) d.process_of_shock.push_back(static_cast<int>(r.i64()));
  for (auto& d : s.draws)
    for (std::int64_t p = 0; p < procs; ++p) {
      StatePath path(static_cast<std::size_t>(t_len));
      for (auto& x : path) x = static_cast<int>(r.i64());
      d.paths.push_back(std::move(path));
    }
  if (markov) {
    for (auto& d : s.draws)
      for (std::int64_t p = 0; p < procs; ++p) d.transitions.push_back(r.mat(m, m));
    for (auto& d : s.draws)
      for (std::int64_t p = 0; p < procs; ++p) d.initials.push_back(r.vec(m));
  }
  for (auto [field, len] : {std::pair{&ParameterState::shrinkage_a, ga}, std::pair{&ParameterState::shrinkage_b, gb}}) {
    for (auto& d : s.draws) (d.*field).gamma = r.vec(len);
    for (auto& d : s.draws) (d.*field).local = r.vec(len);
    for (auto& d : s.draws) (d.*field).global = r.f64();
  }
  std::vector<std::vector<Vector>> scales(static_cast<std::size_t>(draws));
  for (auto& sc : scales)
    for (std::int64_t i = 0; i < n; ++i) sc.push_back(r.vec(m));
  for (std::size_t j = 0; j < s.draws.size(); ++j)
    for (std::int64_t i = 0; i < n; ++i) s.draws[j].variance_posterior.emplace_back(scales[j][static_cast<std::size_t>(i)], r.vec(m));
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in posterior file '" + path + "'");
  return s;
}

}  // namespace hmsh
