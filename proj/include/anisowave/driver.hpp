#ifndef ANISOWAVE_DRIVER_HPP
#define ANISOWAVE_DRIVER_HPP

// Command layer behind the anisowave binary. A run parses a flat key=value
// config file, executes one named command, and drops CSV tables plus a JSON
// run manifest into out_dir. Artifacts are computed fully in memory and only
// then placed with a write-to-temp-and-rename, so a failed run never leaves
// partial files. Header-only like the rest of the library so tests can drive
// commands in-process.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "assembly.hpp"
#include "basis1d.hpp"
#include "compression.hpp"
#include "index_geometry.hpp"
#include "kernels.hpp"
#include "manifold.hpp"
#include "quadrature.hpp"

namespace anisowave {

inline constexpr const char* kDriverVersion = "0.1.0";

// ---------------------------------------------------------------------------
// configuration

struct RunConfig {
  std::string command;  // required; everything else has a default
  int family_order = 1;
  int J = 3;
  std::string kernel = "single_layer";
  double q2 = -1.0;  // twice the operator order
  int r_min = 2;
  int r_max = 6;
  double alpha = 1.2;
  double xi = 0.75;
  double theta = 0.75;
  double sigma_shift = 10.0;
  int quad_order = 8;
  double quad_tol = 1e-6;
  std::string geometry = "unit_square";
  int threads = 0;  // 0 = all available cores; caps workers, never raises them
  std::string out_dir = "out";
  unsigned long seed = 12345;
};

// Carries the 1-based line of the offending config entry; line 0 addresses
// the file as a whole (missing command, unreadable path, override errors).
struct ConfigError : std::runtime_error {
  int line = 0;
  ConfigError(int at, const std::string& msg)
      : std::runtime_error("config:" + std::to_string(at) + ": " + msg), line(at) {}
};

namespace cli_detail {

inline std::string trim(const std::string& s) {
  const size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline long parse_long(const std::string& v, int line, const std::string& key) {
  try {
    size_t used = 0;
    const long out = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(line, "key '" + key + "' needs an integer, got '" + v + "'");
  }
}

inline double parse_double(const std::string& v, int line, const std::string& key) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw ConfigError(line, "key '" + key + "' needs a number, got '" + v + "'");
  }
}

inline const std::set<std::string>& known_commands() {
  static const std::set<std::string> c = {"basis-check", "sstar",      "assemble",
                                          "compress",    "verify-decay", "complexity",
                                          "bounds-audit", "manifold-demo"};
  return c;
}

inline const std::set<std::string>& known_kernels() {
  static const std::set<std::string> c = {"single_layer", "power_law", "log", "constant"};
  return c;
}

inline const std::set<std::string>& known_geometries() {
  static const std::set<std::string> c = {"unit_square", "two_patch_screen", "l_corner",
                                          "cylinder_pair"};
  return c;
}

}  // namespace cli_detail

// Sets one key, validating closed-set values immediately. `line` feeds the
// error anchor; pass 0 for entries that do not come from a file line.
inline void set_config_key(RunConfig& c, const std::string& raw_key, const std::string& raw_value,
                           int line) {
  using namespace cli_detail;
  const std::string key = trim(raw_key), value = trim(raw_value);
  if (key == "command") {
    if (!known_commands().count(value)) throw ConfigError(line, "unknown command '" + value + "'");
    c.command = value;
  } else if (key == "family_order") {
    c.family_order = int(parse_long(value, line, key));
  } else if (key == "J") {
    c.J = int(parse_long(value, line, key));
  } else if (key == "kernel") {
    if (!known_kernels().count(value)) throw ConfigError(line, "unknown kernel '" + value + "'");
    c.kernel = value;
  } else if (key == "q2") {
    c.q2 = parse_double(value, line, key);
  } else if (key == "r_min") {
    c.r_min = int(parse_long(value, line, key));
  } else if (key == "r_max") {
    c.r_max = int(parse_long(value, line, key));
  } else if (key == "alpha") {
    c.alpha = parse_double(value, line, key);
  } else if (key == "xi") {
    c.xi = parse_double(value, line, key);
  } else if (key == "theta") {
    c.theta = parse_double(value, line, key);
  } else if (key == "sigma_shift") {
    c.sigma_shift = parse_double(value, line, key);
  } else if (key == "quad_order") {
    c.quad_order = int(parse_long(value, line, key));
  } else if (key == "quad_tol") {
    c.quad_tol = parse_double(value, line, key);
  } else if (key == "geometry") {
    if (!known_geometries().count(value))
      throw ConfigError(line, "unknown geometry '" + value + "'");
    c.geometry = value;
  } else if (key == "threads") {
    const long t = parse_long(value, line, key);
    if (t < 0) throw ConfigError(line, "threads must be nonnegative");
    c.threads = int(t);
  } else if (key == "out_dir") {
    if (value.empty()) throw ConfigError(line, "out_dir must not be empty");
    c.out_dir = value;
  } else if (key == "seed") {
    const long s = parse_long(value, line, key);
    if (s < 0) throw ConfigError(line, "seed must be nonnegative");
    c.seed = static_cast<unsigned long>(s);
  } else {
    throw ConfigError(line, "unknown key '" + key + "'");
  }
}

// Cross-field checks, shared by the file parser and the override path.
inline void validate_config(const RunConfig& c) {
  if (c.command.empty()) throw ConfigError(0, "missing required key 'command'");
  if (c.r_min < 0) throw ConfigError(0, "r_min must be nonnegative");
  if (c.r_min > c.r_max) throw ConfigError(0, "r_min exceeds r_max");
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const std::string s = cli_detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(line_no, "expected key=value, got '" + s + "'");
    const std::string key = cli_detail::trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(line_no, "empty key");
    if (!seen.insert(key).second) throw ConfigError(line_no, "duplicate key '" + key + "'");
    set_config_key(c, key, s.substr(eq + 1), line_no);
  }
  validate_config(c);
  return c;
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline std::string config_help() {
  return
      "commands\n"
      "  basis-check    Gram identity and vanishing-moment errors for one family\n"
      "  sstar          minimal dual order d_tilde with s* above the target rate,\n"
      "                 over the d in {1,2} x 2q in {-1,0,1} grid\n"
      "  assemble       dense stiffness matrix (upper triangle) on the unit square\n"
      "  compress       sparse pattern and values at radius r_min, with stage labels\n"
      "  verify-decay   per-radius dropped-part norm and weighted tail, r_min..r_max\n"
      "  complexity     per-radius kept-entry counts and the r^2 2^r row-density ratio\n"
      "  bounds-audit   observed entry sizes against the four a-priori bound families\n"
      "  manifold-demo  validate a geometry preset, sample chart-vs-3D distance\n"
      "                 ratios, and sweep the cross-patch compression stages\n"
      "\n"
      "config keys (key=value per line, # starts a comment)\n"
      "  command       (required) one of the commands above\n"
      "  family_order  polynomial order d of the wavelet family     [1]\n"
      "  J             maximum level per direction                  [3]\n"
      "  kernel        single_layer | power_law | log | constant    [single_layer]\n"
      "  q2            twice the operator order 2q                  [-1]\n"
      "  r_min         first compression radius                     [2]\n"
      "  r_max         last compression radius                      [6]\n"
      "  alpha         rate slack factor, > 1                       [1.2]\n"
      "  xi            first-compression exponent, in (1/2, 1)      [0.75]\n"
      "  theta         mixed-compression exponent, in (1/2, 1)      [0.75]\n"
      "  sigma_shift   regularity window of the solution space      [10]\n"
      "  quad_order    Gauss order per direction, in [order+2, 16]  [8]\n"
      "  quad_tol      relative quadrature tolerance                [1e-6]\n"
      "  geometry      unit_square | two_patch_screen | l_corner |\n"
      "                cylinder_pair                                [unit_square]\n"
      "  threads       worker cap; 0 = all available cores          [0]\n"
      "  out_dir       artifact directory, created if missing       [out]\n"
      "  seed          RNG seed for sampling commands               [12345]\n"
      "\n"
      "exit codes\n"
      "  0  success; artifacts placed atomically in out_dir\n"
      "  2  malformed config or invocation (message cites config:LINE)\n"
      "  3  a library guard rejected the run; no files are written\n"
      "\n"
      "determinism\n"
      "  A fixed config reproduces every artifact byte for byte, except wall-clock\n"
      "  fields: the timings block of run_manifest.json and the runtime_s column\n"
      "  of decay.csv.\n";
}

// ---------------------------------------------------------------------------
// artifact plumbing

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

struct Artifact {
  std::string name;
  std::string content;
};

namespace cli_detail {

struct CsvBuilder {
  std::string text;
  void line(std::initializer_list<std::string> cells) {
    bool first = true;
    for (const std::string& c : cells) {
      if (!first) text += ',';
      text += c;
      first = false;
    }
    text += '\n';
  }
};

inline void write_atomic(const std::filesystem::path& dir, const Artifact& a) {
  namespace fs = std::filesystem;
  const fs::path tmp = dir / (a.name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << a.content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, dir / a.name);
}

}  // namespace cli_detail

inline nlohmann::json manifest_base(const RunConfig& c) {
  nlohmann::json j;
  j["command"] = c.command;
  j["params"] = {{"family_order", c.family_order},
                 {"J", c.J},
                 {"kernel", c.kernel},
                 {"q2", c.q2},
                 {"r_min", c.r_min},
                 {"r_max", c.r_max},
                 {"alpha", c.alpha},
                 {"xi", c.xi},
                 {"theta", c.theta},
                 {"sigma_shift", c.sigma_shift},
                 {"quad_order", c.quad_order},
                 {"quad_tol", c.quad_tol},
                 {"geometry", c.geometry},
                 {"threads", c.threads},
                 {"out_dir", c.out_dir},
                 {"seed", c.seed}};
  j["versions"] = {{"anisowave", kDriverVersion}, {"manifest_format", 1}};
  return j;
}

inline CompressionParams compression_from(const RunConfig& c, int r) {
  CompressionParams p;
  p.q = 0.5 * c.q2;
  p.d = c.family_order;
  p.d_tilde = c.family_order;
  p.gamma = double(c.family_order) - 0.5;
  p.sigma_shift = c.sigma_shift;
  p.alpha = c.alpha;
  p.xi = c.xi;
  p.theta = c.theta;
  p.r = r;
  return p;
}

inline QuadratureSpec quad_from(const RunConfig& c) {
  QuadratureSpec s;
  s.gauss_order = c.quad_order;
  s.rel_tol = c.quad_tol;
  return s;
}

// ---------------------------------------------------------------------------
// reusable studies (the acceptance suite drives these directly)

struct BasisCheckResult {
  long members = 0;
  long pairs = 0;  // support-overlapping pairs; disjoint pairs are exact zeros
  double max_gram_err = 0.0;
  double max_moment_err = 0.0;
};

inline BasisCheckResult check_basis_exactness(int order, int max_level) {
  const WaveletFamily fam = build_family(order, max_level);
  std::vector<Member1D> mem;
  for (int t = 0; t < order; ++t) mem.push_back({Kind1D::scaling, 0, 0, t});
  for (int j = 0; j <= max_level; ++j)
    for (int t = 0; t < order; ++t)
      for (int k = 0; k < (1 << j); ++k) mem.push_back({Kind1D::wavelet, j, k, t});
  std::vector<PiecewisePoly> pp;
  pp.reserve(mem.size());
  for (const Member1D& m : mem) pp.push_back(realize(fam, m));

  BasisCheckResult res;
  res.members = long(mem.size());
  for (size_t i = 0; i < mem.size(); ++i) {
    const double lo = support_lo(mem[i]), hi = support_hi(mem[i]);
    for (size_t j = i; j < mem.size(); ++j) {
      if (support_lo(mem[j]) >= hi || support_hi(mem[j]) <= lo) continue;
      const double want = i == j ? 1.0 : 0.0;
      res.max_gram_err = std::max(res.max_gram_err, std::abs(pp_inner(pp[i], pp[j]) - want));
      ++res.pairs;
    }
    if (mem[i].kind == Kind1D::wavelet)
      for (int mm = 0; mm < order; ++mm)
        res.max_moment_err = std::max(res.max_moment_err, std::abs(pp_moment(pp[i], mm)));
  }
  return res;
}

struct DecayRow {
  int r = 0;
  long nnz_total = 0;
  long nnz_row_max = 0;
  double err_norm_est = 0.0;
  double schur_tail_max = 0.0;
  double runtime_s = 0.0;
};

// Per-radius dropped-part spectral norm and weighted tail against one dense
// quadrature pass. The dense entries are bitwise the ones the compressed
// path would compute, so zeroing kept positions reproduces L - L_r exactly.
inline std::vector<DecayRow> decay_study(const BasisWindow& w, const DenseMatrix& full, int r_min,
                                         int r_max, const CompressionParams& base) {
  const long n = w.size();
  std::vector<DecayRow> rows;
  for (int r = r_min; r <= r_max; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    CompressionParams p = base;
    p.r = r;
    DecayRow row;
    row.r = r;
    DenseMatrix dropped = full;
    std::vector<long> row_nnz(size_t(n), 0);
    for (long i = 0; i < n; ++i)
      for (long j = i; j < n; ++j) {
        if (!keep_entry(w.indices[size_t(i)], w.indices[size_t(j)], p).kept) continue;
        dropped.at(i, j) = 0.0;
        dropped.at(j, i) = 0.0;
        row.nnz_total += i == j ? 1 : 2;
        ++row_nnz[size_t(i)];
        if (i != j) ++row_nnz[size_t(j)];
      }
    row.nnz_row_max = *std::max_element(row_nnz.begin(), row_nnz.end());
    row.err_norm_est = spectral_norm(matrix_map(dropped)).value;
    row.schur_tail_max = schur_weighted_tail(w, full, p);
    row.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(row);
  }
  return rows;
}

// Rank correlation with average ranks on ties; 0 when either side is constant.
inline double spearman_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman_rank: need two samples of equal size >= 2");
  auto ranks_of = [](const std::vector<double>& v) {
    const size_t n = v.size();
    std::vector<size_t> ord(n);
    std::iota(ord.begin(), ord.end(), size_t(0));
    std::sort(ord.begin(), ord.end(), [&](size_t i, size_t j) { return v[i] < v[j]; });
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
      size_t j = i;
      while (j + 1 < n && v[ord[j + 1]] == v[ord[i]]) ++j;
      const double avg = 0.5 * (double(i) + double(j)) + 1.0;
      for (size_t t = i; t <= j; ++t) rank[ord[t]] = avg;
      i = j + 1;
    }
    return rank;
  };
  const std::vector<double> ra = ranks_of(a), rb = ranks_of(b);
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= double(ra.size());
  mb /= double(rb.size());
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

struct BoundAuditRow {
  std::string kind;
  long pairs = 0;
  double fitted_c = 0.0;  // max |entry|/bound over the coarsest level-sum block
  double median_ratio = 0.0;
  double max_ratio = 0.0;
  double max_over_median = 0.0;
  double spearman = 0.0;  // rank correlation of log-ratio against level sum
};

// Operative-regime filter for auditing a bound family. Each estimate is only
// sharp on the support-distance cell where the compression scheme relies on
// it: beyond one coarse mesh width the far-field estimates take over, and a
// pair separated in some direction never reaches the overlap estimates. A
// bound stays a valid upper bound outside its cell, but the needed constant
// shrinks by the unused cancellation, so ratios sampled there say nothing
// about tightness.
inline bool bound_audit_regime(EntryBound kind, const MultiIndex& a, const MultiIndex& b) {
  const int m = std::min(std::min(a.x.j, b.x.j), std::min(a.y.j, b.y.j));
  const double d = delta(a, b);
  switch (kind) {
    case EntryBound::far_field:
    case EntryBound::two_moment:
      return d >= std::exp2(double(-m));
    case EntryBound::long_face_x:
    case EntryBound::long_face_y:
      return d > 0.0 && d < std::exp2(double(-m));
    case EntryBound::near_field_x:
    case EntryBound::near_field_y:
      return d == 0.0;
    default:
      return true;
  }
}

// Samples random index pairs and scores each bound family on the pairs where
// its preconditions hold and its operative regime applies. The long-face and
// near-field families accept either axis orientation.
inline std::vector<BoundAuditRow> run_bound_audit(const WaveletFamily& fam, const Kernel& kernel,
                                                  double q, const QuadratureSpec& spec, int J,
                                                  long pairs_per_kind, unsigned long seed) {
  if (pairs_per_kind < 4)
    throw std::invalid_argument("run_bound_audit: need at least 4 pairs per kind");
  const BasisWindow w = build_window(fam, J);
  EntryEngine eng(fam, kernel, q, spec);

  struct Group {
    const char* name;
    std::vector<EntryBound> kinds;
    std::vector<double> ratio_raw;
    std::vector<double> level_sum;
  };
  std::vector<Group> groups = {
      {"far_field", {EntryBound::far_field}, {}, {}},
      {"two_moment", {EntryBound::two_moment}, {}, {}},
      {"long_face", {EntryBound::long_face_x, EntryBound::long_face_y}, {}, {}},
      {"near_field", {EntryBound::near_field_x, EntryBound::near_field_y}, {}, {}},
  };
  auto bound_for = [&](const Group& g, const MultiIndex& a,
                       const MultiIndex& b) -> std::optional<double> {
    for (EntryBound k : g.kinds) {
      if (!bound_audit_regime(k, a, b)) continue;
      const std::optional<double> bd = entry_bound(k, fam, a, b, q);
      if (bd && *bd > 0.0 && std::isfinite(*bd)) return bd;
    }
    return std::nullopt;
  };

  std::mt19937 gen{static_cast<uint32_t>(seed)};
  std::uniform_int_distribution<long> pick(0, w.size() - 1);
  long attempts = 0;
  const long max_attempts = pairs_per_kind * 2000;
  auto unfilled = [&] {
    for (const Group& g : groups)
      if (long(g.ratio_raw.size()) < pairs_per_kind) return true;
    return false;
  };
  while (unfilled() && attempts < max_attempts) {
    ++attempts;
    const MultiIndex a = w.indices[size_t(pick(gen))];
    const MultiIndex b = w.indices[size_t(pick(gen))];
    double entry_abs = -1.0;  // computed lazily, shared across groups
    for (Group& g : groups) {
      if (long(g.ratio_raw.size()) >= pairs_per_kind) continue;
      const std::optional<double> bd = bound_for(g, a, b);
      if (!bd) continue;
      if (entry_abs < 0.0) entry_abs = std::abs(eng.entry(a, b));
      if (entry_abs <= 1e-300) break;  // a vacuous sample for every family
      g.ratio_raw.push_back(entry_abs / *bd);
      g.level_sum.push_back(double(level_l1(a) + level_l1(b)));
    }
  }

  std::vector<BoundAuditRow> rows;
  for (Group& g : groups) {
    BoundAuditRow row;
    row.kind = g.name;
    row.pairs = long(g.ratio_raw.size());
    if (row.pairs < 4) {
      rows.push_back(row);
      continue;
    }
    const double coarsest = *std::min_element(g.level_sum.begin(), g.level_sum.end());
    double c_fit = 0.0;
    for (size_t i = 0; i < g.ratio_raw.size(); ++i)
      if (g.level_sum[i] == coarsest) c_fit = std::max(c_fit, g.ratio_raw[i]);
    if (c_fit <= 0.0) c_fit = *std::max_element(g.ratio_raw.begin(), g.ratio_raw.end());
    row.fitted_c = c_fit;

    std::vector<double> ratios(g.ratio_raw);
    for (double& v : ratios) v /= c_fit;
    std::vector<double> sorted(ratios);
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    row.median_ratio = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    row.max_ratio = sorted.back();
    row.max_over_median = row.median_ratio > 0.0
                              ? row.max_ratio / row.median_ratio
                              : std::numeric_limits<double>::infinity();
    std::vector<double> logs(ratios);
    for (double& v : logs) v = std::log(v);
    row.spearman = spearman_rank(logs, g.level_sum);
    rows.push_back(row);
  }
  return rows;
}

// 3D support distance from an (n+1)^2 sample grid per member; exceeds the
// true minimum by at most the grid resolution times the patch stretch.
inline double sampled_support_distance_3d(const PatchGeometry& g, const MultiIndex& a,
                                          const MultiIndex& b, int n = 12) {
  if (n < 1 || n > 64)
    throw std::invalid_argument("sampled_support_distance_3d: need 1 <= n <= 64");
  auto grid = [&](const MultiIndex& m) {
    const PatchMap& pm = g.maps[size_t(m.patch)];
    const double x0 = support_lo(m.x), x1 = support_hi(m.x);
    const double y0 = support_lo(m.y), y1 = support_hi(m.y);
    std::vector<Vec3> pts;
    pts.reserve(size_t(n + 1) * size_t(n + 1));
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j <= n; ++j)
        pts.push_back(map_point(pm, x0 + (x1 - x0) * i / n, y0 + (y1 - y0) * j / n));
    return pts;
  };
  const std::vector<Vec3> pa = grid(a), pb = grid(b);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& u : pa)
    for (const Vec3& v : pb)
      best = std::min(best, std::hypot(u[0] - v[0], u[1] - v[1], u[2] - v[2]));
  return best;
}

struct RatioSample {
  int patch_a = 0, patch_b = 0;
  double delta_chart = 0.0;
  double delta_3d = 0.0;
  double ratio = 0.0;  // delta_chart / delta_3d
};

// Random cross-patch member pairs on edge- or vertex-adjacent patches, with
// the chart distance set against a sampled 3D distance. Levels are capped at
// 3 so the sampling grid resolves the supports.
inline std::vector<RatioSample> sample_chart_ratios(const PatchGeometry& g,
                                                    const WaveletFamily& fam, int J, long count,
                                                    unsigned long seed, int grid = 12) {
  std::vector<RatioSample> out;
  std::vector<std::pair<int, int>> adjacent;
  for (int a = 0; a < g.patches; ++a)
    for (int b = a + 1; b < g.patches; ++b) {
      const Adjacency tag = g.adj[size_t(a)][size_t(b)].tag;
      if (tag == Adjacency::shared_edge || tag == Adjacency::shared_vertex)
        adjacent.emplace_back(a, b);
    }
  if (adjacent.empty() || count <= 0) return out;

  const BasisWindow w = build_window(fam, std::min(J, 3));
  std::mt19937 gen{static_cast<uint32_t>(seed)};
  std::uniform_int_distribution<size_t> pick_pair(0, adjacent.size() - 1);
  std::uniform_int_distribution<long> pick_idx(0, w.size() - 1);
  long attempts = 0;
  const long max_attempts = count * 400;
  while (long(out.size()) < count && attempts < max_attempts) {
    ++attempts;
    const auto [pa, pb] = adjacent[pick_pair(gen)];
    MultiIndex a = w.indices[size_t(pick_idx(gen))];
    MultiIndex b = w.indices[size_t(pick_idx(gen))];
    a.patch = pa;
    b.patch = pb;
    const SurfaceDistances sd = surface_distances(g, a, b);
    if (!(sd.delta > 1e-9)) continue;
    const double d3 = sampled_support_distance_3d(g, a, b, grid);
    if (!(d3 > 1e-9)) continue;
    out.push_back({pa, pb, sd.delta, d3, sd.delta / d3});
  }
  return out;
}

inline const char* adjacency_name(Adjacency a) {
  switch (a) {
    case Adjacency::same: return "same";
    case Adjacency::shared_edge: return "shared_edge";
    case Adjacency::shared_vertex: return "shared_vertex";
    case Adjacency::separated: return "separated";
  }
  throw std::invalid_argument("adjacency_name: unknown tag");
}

// Stage decisions over every pair of the multi-patch window at one radius.
inline std::array<long, 9> surface_stage_histogram(const PatchGeometry& g,
                                                   const WaveletFamily& fam, int J,
                                                   const CompressionParams& p) {
  const BasisWindow w = build_window(fam, J);
  std::vector<MultiIndex> idx;
  idx.reserve(size_t(g.patches) * w.indices.size());
  for (int patch = 0; patch < g.patches; ++patch)
    for (MultiIndex m : w.indices) {
      m.patch = patch;
      idx.push_back(m);
    }
  std::array<long, 9> hist{};
  for (size_t i = 0; i < idx.size(); ++i)
    for (size_t j = i; j < idx.size(); ++j) {
      const KeepDecision dec = keep_entry_surface(g, idx[i], idx[j], p);
      hist[size_t(dec.stage)] += i == j ? 1 : 2;
    }
  return hist;
}

// ---------------------------------------------------------------------------
// commands

namespace cli_detail {

struct CommandOutput {
  nlohmann::json manifest;
  std::vector<Artifact> files;
};

inline nlohmann::json histogram_json(const std::array<long, 9>& h) {
  nlohmann::json j;
  for (int s = 0; s < 9; ++s) j[stage_name(Stage(s))] = h[size_t(s)];
  return j;
}

inline CommandOutput cmd_basis_check(const RunConfig& c) {
  const BasisCheckResult r = check_basis_exactness(c.family_order, c.J);
  CommandOutput out;
  CsvBuilder csv;
  csv.line({"order", "max_level", "members", "pairs_checked", "max_gram_err", "max_moment_err"});
  csv.line({std::to_string(c.family_order), std::to_string(c.J), std::to_string(r.members),
            std::to_string(r.pairs), fmt_g(r.max_gram_err), fmt_g(r.max_moment_err)});
  out.files.push_back({"basis_check.csv", csv.text});
  out.manifest["basis_check"] = {{"members", r.members},
                                 {"pairs_checked", r.pairs},
                                 {"max_gram_err", r.max_gram_err},
                                 {"max_moment_err", r.max_moment_err}};
  return out;
}

inline CommandOutput cmd_sstar(const RunConfig& c) {
  CommandOutput out;
  CsvBuilder csv;
  csv.line({"d", "two_q", "s_bar", "d_tilde_min", "s_star_at_min"});
  nlohmann::json rows = nlohmann::json::array();
  for (int d : {1, 2})
    for (int q2 : {-1, 0, 1}) {
      CompressionParams p;
      p.q = 0.5 * q2;
      p.d = d;
      p.d_tilde = d;
      p.gamma = double(d) - 0.5;
      p.sigma_shift = c.sigma_shift;
      p.alpha = c.alpha;
      p.xi = c.xi;
      p.theta = c.theta;
      const double sbar = rate_params(p).s_bar;
      const std::optional<int> dt = minimal_vanishing_moments(p);
      std::string ss = "-";
      if (dt) {
        p.d_tilde = *dt;
        ss = fmt_g(s_star(p));
      }
      csv.line({std::to_string(d), std::to_string(q2), fmt_g(sbar),
                dt ? std::to_string(*dt) : "-", ss});
      rows.push_back({{"d", d},
                      {"two_q", q2},
                      {"s_bar", sbar},
                      {"d_tilde_min", dt ? nlohmann::json(*dt) : nlohmann::json(nullptr)}});
    }
  out.files.push_back({"sstar_table.csv", csv.text});
  out.manifest["sstar"] = rows;
  return out;
}

inline CommandOutput cmd_assemble(const RunConfig& c) {
  const WaveletFamily fam = build_family(c.family_order, c.J);
  const BasisWindow w = build_window(fam, c.J);
  const Kernel k = make_kernel(c.kernel, c.q2);
  const DenseMatrix full = assemble_full(w, k, 0.5 * c.q2, quad_from(c));
  CommandOutput out;
  CsvBuilder csv;
  csv.line({"i", "j", "value"});
  for (long i = 0; i < full.n; ++i)
    for (long j = i; j < full.n; ++j)
      csv.line({std::to_string(i), std::to_string(j), fmt_g(full.at(i, j))});
  out.files.push_back({"matrix.csv", csv.text});
  out.manifest["assemble"] = {
      {"n", full.n}, {"stored_entries", full.n * (full.n + 1) / 2}, {"symmetric", true}};
  return out;
}

inline CommandOutput cmd_compress(const RunConfig& c) {
  const WaveletFamily fam = build_family(c.family_order, c.J);
  const BasisWindow w = build_window(fam, c.J);
  const Kernel k = make_kernel(c.kernel, c.q2);
  const CompressionParams p = compression_from(c, c.r_min);
  const CompressedOperator op = assemble_compressed(w, k, p, quad_from(c));
  CommandOutput out;
  CsvBuilder csv;
  csv.line({"row", "col", "stage", "value"});
  for (long i = 0; i < op.n; ++i)
    for (long t = op.row_ptr[size_t(i)]; t < op.row_ptr[size_t(i) + 1]; ++t) {
      const long j = op.col[size_t(t)];
      const Stage st = keep_entry(w.indices[size_t(i)], w.indices[size_t(j)], p).stage;
      csv.line({std::to_string(i), std::to_string(j), stage_name(st), fmt_g(op.val[size_t(t)])});
    }
  out.files.push_back({"pattern.csv", csv.text});
  out.manifest["compress"] = {{"r", op.r},
                              {"n", op.n},
                              {"nnz", op.nnz()},
                              {"warn_count", op.warn_count},
                              {"worst_err", op.worst_err},
                              {"stage_histogram", histogram_json(op.stage_histogram)}};
  return out;
}

inline CommandOutput cmd_verify_decay(const RunConfig& c) {
  const WaveletFamily fam = build_family(c.family_order, c.J);
  const BasisWindow w = build_window(fam, c.J);
  const Kernel k = make_kernel(c.kernel, c.q2);
  const DenseMatrix full = assemble_full(w, k, 0.5 * c.q2, quad_from(c));
  const std::vector<DecayRow> rows = decay_study(w, full, c.r_min, c.r_max,
                                                 compression_from(c, c.r_min));
  CommandOutput out;
  CsvBuilder csv;
  csv.line({"r", "nnz_total", "nnz_row_max", "err_norm_est", "schur_tail_max", "runtime_s"});
  nlohmann::json jrows = nlohmann::json::array();
  std::vector<int> rs_err, rs_tail;
  std::vector<double> es_err, es_tail;
  for (const DecayRow& row : rows) {
    csv.line({std::to_string(row.r), std::to_string(row.nnz_total),
              std::to_string(row.nnz_row_max), fmt_g(row.err_norm_est),
              fmt_g(row.schur_tail_max), fmt_g(row.runtime_s)});
    jrows.push_back({{"r", row.r},
                     {"nnz_total", row.nnz_total},
                     {"nnz_row_max", row.nnz_row_max},
                     {"err_norm_est", row.err_norm_est},
                     {"schur_tail_max", row.schur_tail_max}});
    if (row.r > 1 && row.err_norm_est > 0.0) {
      rs_err.push_back(row.r);
      es_err.push_back(row.err_norm_est);
    }
    if (row.r > 1 && row.schur_tail_max > 0.0) {
      rs_tail.push_back(row.r);
      es_tail.push_back(row.schur_tail_max);
    }
  }
  out.files.push_back({"decay.csv", csv.text});
  out.manifest["verify_decay"] = {{"rows", jrows}};
  if (rs_err.size() >= 3)
    out.manifest["verify_decay"]["err_slope"] = fit_decay(rs_err, es_err);
  if (rs_tail.size() >= 3)
    out.manifest["verify_decay"]["schur_slope"] = fit_decay(rs_tail, es_tail);
  return out;
}

inline CommandOutput cmd_complexity(const RunConfig& c) {
  const WaveletFamily fam = build_family(c.family_order, c.J);
  const BasisWindow w = build_window(fam, c.J);
  CommandOutput out;
  CsvBuilder csv;
  csv.line({"r", "nnz_total", "nnz_row_max", "row_max_over_r2_2r"});
  nlohmann::json jrows = nlohmann::json::array();
  for (int r = c.r_min; r <= c.r_max; ++r) {
    const PatternSummary s = pattern_summary(w, compression_from(c, r));
    const double scale = r >= 1 ? double(r) * double(r) * std::exp2(double(r)) : 1.0;
    const double ratio = double(s.max_row) / scale;
    csv.line({std::to_string(r), std::to_string(s.nnz), std::to_string(s.max_row), fmt_g(ratio)});
    jrows.push_back({{"r", r},
                     {"nnz_total", s.nnz},
                     {"nnz_row_max", s.max_row},
                     {"row_max_over_r2_2r", ratio}});
  }
  out.files.push_back({"complexity.csv", csv.text});
  out.manifest["complexity"] = {{"rows", jrows}, {"n", w.size()}};
  return out;
}

inline CommandOutput cmd_bounds_audit(const RunConfig& c) {
  const WaveletFamily fam = build_family(c.family_order, c.J);
  const Kernel k = make_kernel(c.kernel, c.q2);
  const std::vector<BoundAuditRow> rows =
      run_bound_audit(fam, k, 0.5 * c.q2, quad_from(c), c.J, 500, c.seed);
  CommandOutput out;
  CsvBuilder csv;
  csv.line({"kind", "pairs", "fitted_c", "median_ratio", "max_ratio", "max_over_median",
            "spearman"});
  nlohmann::json jrows = nlohmann::json::array();
  for (const BoundAuditRow& r : rows) {
    csv.line({r.kind, std::to_string(r.pairs), fmt_g(r.fitted_c), fmt_g(r.median_ratio),
              fmt_g(r.max_ratio), fmt_g(r.max_over_median), fmt_g(r.spearman)});
    jrows.push_back({{"kind", r.kind},
                     {"pairs", r.pairs},
                     {"fitted_c", r.fitted_c},
                     {"median_ratio", r.median_ratio},
                     {"max_ratio", r.max_ratio},
                     {"max_over_median", r.max_over_median},
                     {"spearman", r.spearman}});
  }
  out.files.push_back({"bounds_audit.csv", csv.text});
  out.manifest["bounds_audit"] = jrows;
  return out;
}

inline CommandOutput cmd_manifold_demo(const RunConfig& c) {
  const PatchGeometry g = make_geometry(c.geometry);
  validate_geometry(g);
  const WaveletFamily fam = build_family(c.family_order, std::max(c.J, 0));
  const std::vector<RatioSample> samples = sample_chart_ratios(g, fam, c.J, 200, c.seed);
  const std::array<long, 9> hist =
      surface_stage_histogram(g, fam, c.J, compression_from(c, c.r_min));

  CommandOutput out;
  CsvBuilder csv;
  csv.line({"sample", "patch_a", "patch_b", "delta_chart", "delta_3d", "ratio"});
  long in_band = 0;
  const double lo = 1.0 / g.lipschitz, hi = g.lipschitz;
  const double slack = 0.06;  // grid-sampling resolution allowance
  for (size_t i = 0; i < samples.size(); ++i) {
    const RatioSample& s = samples[i];
    csv.line({std::to_string(i), std::to_string(s.patch_a), std::to_string(s.patch_b),
              fmt_g(s.delta_chart), fmt_g(s.delta_3d), fmt_g(s.ratio)});
    if (s.ratio >= lo - slack && s.ratio <= hi + slack) ++in_band;
  }
  nlohmann::json adj = nlohmann::json::array();
  for (int a = 0; a < g.patches; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int b = 0; b < g.patches; ++b)
      row.push_back(adjacency_name(g.adj[size_t(a)][size_t(b)].tag));
    adj.push_back(row);
  }
  out.files.push_back({"ratios.csv", csv.text});
  out.manifest["manifold_demo"] = {
      {"geometry", g.name},
      {"patches", g.patches},
      {"lipschitz", g.lipschitz},
      {"separation_floor", std::isfinite(g.separation_floor)
                               ? nlohmann::json(g.separation_floor)
                               : nlohmann::json(nullptr)},
      {"adjacency", adj},
      {"ratio_samples", samples.size()},
      {"ratio_in_band", in_band},
      {"band", {lo, hi}},
      {"stage_histogram", histogram_json(hist)}};
  return out;
}

}  // namespace cli_detail

// Executes the configured command. Returns 0 on success, 3 when a library
// guard rejects the run; in the failure case nothing has been written yet,
// because every artifact is built in memory before the first rename.
inline int run_command(const RunConfig& c, std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  cli_detail::CommandOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    if (c.command == "basis-check")
      out = cli_detail::cmd_basis_check(c);
    else if (c.command == "sstar")
      out = cli_detail::cmd_sstar(c);
    else if (c.command == "assemble")
      out = cli_detail::cmd_assemble(c);
    else if (c.command == "compress")
      out = cli_detail::cmd_compress(c);
    else if (c.command == "verify-decay")
      out = cli_detail::cmd_verify_decay(c);
    else if (c.command == "complexity")
      out = cli_detail::cmd_complexity(c);
    else if (c.command == "bounds-audit")
      out = cli_detail::cmd_bounds_audit(c);
    else if (c.command == "manifold-demo")
      out = cli_detail::cmd_manifold_demo(c);
    else
      throw std::invalid_argument("run_command: unknown command '" + c.command + "'");
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }

  nlohmann::json manifest = manifest_base(c);
  manifest.update(out.manifest);
  manifest["timings"] = {
      {"total_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  out.files.push_back({"run_manifest.json", manifest.dump(2) + "\n"});

  fs::create_directories(c.out_dir);
  for (const Artifact& a : out.files) cli_detail::write_atomic(c.out_dir, a);
  return 0;
}

}  // namespace anisowave

#endif
