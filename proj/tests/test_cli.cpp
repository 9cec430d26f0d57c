#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "anisowave/driver.hpp"

using namespace anisowave;
namespace fs = std::filesystem;

namespace {

// fresh artifact directory per test, under the ctest working directory so a
// failing run leaves something inspectable behind
std::string fresh_dir(const std::string& tag) {
  const std::string dir = "cli_out_" + tag;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string c; std::getline(in, c, ',');) out.push_back(c);
  return out;
}

int line_of_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.line;
  }
  return -1;
}

}  // namespace

TEST_CASE("config defaults survive a minimal file") {
  const RunConfig c = parse_config_text("command=sstar\n");
  CHECK(c.command == "sstar");
  CHECK(c.family_order == 1);
  CHECK(c.J == 3);
  CHECK(c.kernel == "single_layer");
  CHECK(c.q2 == -1.0);
  CHECK(c.r_min == 2);
  CHECK(c.r_max == 6);
  CHECK(c.alpha == 1.2);
  CHECK(c.xi == 0.75);
  CHECK(c.theta == 0.75);
  CHECK(c.sigma_shift == 10.0);
  CHECK(c.quad_order == 8);
  CHECK(c.quad_tol == 1e-6);
  CHECK(c.geometry == "unit_square");
  CHECK(c.threads == 0);
  CHECK(c.out_dir == "out");
  CHECK(c.seed == 12345UL);
}

TEST_CASE("config parser reads every key") {
  const RunConfig c = parse_config_text(
      "# full sweep\n"
      "command = verify-decay\n"
      "family_order = 2\n"
      "J = 4\n"
      "kernel = power_law\n"
      "q2 = 0\n"
      "r_min = 1\n"
      "r_max = 5\n"
      "alpha = 1.3\n"
      "xi = 0.8\n"
      "theta = 0.6\n"
      "sigma_shift = 7.5\n"
      "quad_order = 6\n"
      "quad_tol = 1e-5\n"
      "geometry = l_corner\n"
      "threads = 2\n"
      "out_dir = scratch\n"
      "seed = 99\n");
  CHECK(c.command == "verify-decay");
  CHECK(c.family_order == 2);
  CHECK(c.J == 4);
  CHECK(c.kernel == "power_law");
  CHECK(c.q2 == 0.0);
  CHECK(c.r_min == 1);
  CHECK(c.r_max == 5);
  CHECK(c.alpha == 1.3);
  CHECK(c.xi == 0.8);
  CHECK(c.theta == 0.6);
  CHECK(c.sigma_shift == 7.5);
  CHECK(c.quad_order == 6);
  CHECK(c.quad_tol == 1e-5);
  CHECK(c.geometry == "l_corner");
  CHECK(c.threads == 2);
  CHECK(c.out_dir == "scratch");
  CHECK(c.seed == 99UL);
}

TEST_CASE("parse errors carry the offending line") {
  CHECK(line_of_error("command=sstar\n\nJ=oops\n") == 3);
  CHECK(line_of_error("command=sstar\nnot a pair\n") == 2);
  CHECK(line_of_error("command=sstar\nJ=2\nJ=3\n") == 3);
  CHECK(line_of_error("command=frobnicate\n") == 1);
  CHECK(line_of_error("command=sstar\nkernel=biharmonic\n") == 2);
  CHECK(line_of_error("command=sstar\ngeometry=moebius\n") == 2);
  CHECK(line_of_error("command=sstar\nwidgets=3\n") == 2);
  CHECK(line_of_error("command=sstar\nseed=-4\n") == 2);
  // whole-file problems anchor at line 0
  CHECK(line_of_error("J=2\n") == 0);
  CHECK(line_of_error("command=sstar\nr_min=5\nr_max=2\n") == 0);

  try {
    parse_config_text("command=sstar\nquad_tol=fast\n");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("config:2:", 0) == 0);
  }
}

TEST_CASE("sstar table matches the published minimal dual orders") {
  RunConfig c = parse_config_text("command=sstar\n");
  c.out_dir = fresh_dir("sstar");
  REQUIRE(run_command(c) == 0);

  const auto rows = lines_of(slurp(fs::path(c.out_dir) / "sstar_table.csv"));
  REQUIRE(rows.size() == 7);
  CHECK(rows[0] == "d,two_q,s_bar,d_tilde_min,s_star_at_min");
  const std::vector<std::pair<std::string, std::string>> expect = {
      {"1,-1", "4"}, {"1,0", "3"}, {"1,1", "-"},
      {"2,-1", "6"}, {"2,0", "5"}, {"2,1", "4"},
  };
  for (size_t i = 0; i < expect.size(); ++i) {
    const auto cells = cells_of(rows[i + 1]);
    REQUIRE(cells.size() == 5);
    CHECK(cells[0] + "," + cells[1] == expect[i].first);
    CHECK(cells[3] == expect[i].second);
  }
  // the run manifest mirrors the table
  const auto manifest = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "run_manifest.json"));
  REQUIRE(manifest.at("sstar").size() == 6);
  CHECK(manifest.at("sstar")[0].at("d_tilde_min") == 4);
  CHECK(manifest.at("sstar")[2].at("d_tilde_min").is_null());
}

TEST_CASE("verify-decay emits one row per radius with monotone pattern size") {
  RunConfig c = parse_config_text(
      "command=verify-decay\nJ=2\nr_min=1\nr_max=4\nquad_tol=1e-5\n");
  c.out_dir = fresh_dir("decay");
  REQUIRE(run_command(c) == 0);

  const auto rows = lines_of(slurp(fs::path(c.out_dir) / "decay.csv"));
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "r,nnz_total,nnz_row_max,err_norm_est,schur_tail_max,runtime_s");
  long prev_nnz = -1;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto cells = cells_of(rows[i]);
    REQUIRE(cells.size() == 6);
    CHECK(std::stoi(cells[0]) == int(i));
    const long nnz = std::stol(cells[1]);
    CHECK(nnz >= prev_nnz);
    prev_nnz = nnz;
    CHECK(std::stod(cells[3]) >= 0.0);
    CHECK(std::stod(cells[4]) >= 0.0);
  }
}

TEST_CASE("guard violations abort without leaving partial files") {
  // order 4 at J = 8 needs (4 * 2^9)^2 > 10^6 indices, which the window
  // builder refuses
  RunConfig c = parse_config_text("command=assemble\nfamily_order=4\nJ=8\n");
  c.out_dir = fresh_dir("guard");
  std::ostringstream sink;
  CHECK(run_command(c, sink) == 3);
  CHECK(!fs::exists(c.out_dir));
  CHECK(sink.str().rfind("error:", 0) == 0);

  // unknown command sneaking past the parser is the same failure class
  RunConfig bogus = parse_config_text("command=sstar\n");
  bogus.command = "bogus";
  bogus.out_dir = fresh_dir("guard2");
  CHECK(run_command(bogus, sink) == 3);
  CHECK(!fs::exists(bogus.out_dir));
}

TEST_CASE("reruns are byte-identical once timing fields are dropped") {
  // the same config is executed twice into the same directory; only
  // wall-clock fields may differ between the two snapshots
  RunConfig c = parse_config_text(
      "command=verify-decay\nJ=2\nr_min=0\nr_max=2\nquad_tol=1e-5\n");
  c.out_dir = fresh_dir("det");
  REQUIRE(run_command(c) == 0);
  const std::string csv_a = slurp(fs::path(c.out_dir) / "decay.csv");
  const std::string man_a = slurp(fs::path(c.out_dir) / "run_manifest.json");
  REQUIRE(run_command(c) == 0);
  const std::string csv_b = slurp(fs::path(c.out_dir) / "decay.csv");
  const std::string man_b = slurp(fs::path(c.out_dir) / "run_manifest.json");

  auto strip_runtime = [](const std::string& text) {
    std::string out;
    for (const std::string& l : lines_of(text)) {
      const size_t cut = l.rfind(',');
      out += l.substr(0, cut);
      out += '\n';
    }
    return out;
  };
  CHECK(csv_a != "");
  // r = 0 keeps only the lowest stage, so the table has real drops in it
  CHECK(cells_of(lines_of(csv_a)[1])[3] != "0");
  CHECK(strip_runtime(csv_a) == strip_runtime(csv_b));

  auto sans_timings = [](const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    j.erase("timings");
    return j.dump();
  };
  CHECK(sans_timings(man_a) == sans_timings(man_b));

  // complexity has no timing column at all: raw bytes must match
  RunConfig k = parse_config_text("command=complexity\nJ=2\nr_min=1\nr_max=4\n");
  k.out_dir = fresh_dir("det_c");
  REQUIRE(run_command(k) == 0);
  const std::string comp_a = slurp(fs::path(k.out_dir) / "complexity.csv");
  REQUIRE(run_command(k) == 0);
  CHECK(comp_a == slurp(fs::path(k.out_dir) / "complexity.csv"));
}

TEST_CASE("compress dump lists only surviving stages") {
  RunConfig c = parse_config_text("command=compress\nJ=2\nr_min=2\nquad_tol=1e-5\n");
  c.out_dir = fresh_dir("compress");
  REQUIRE(run_command(c) == 0);

  const auto rows = lines_of(slurp(fs::path(c.out_dir) / "pattern.csv"));
  REQUIRE(rows.size() >= 2);
  CHECK(rows[0] == "row,col,stage,value");
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto cells = cells_of(rows[i]);
    REQUIRE(cells.size() == 4);
    const bool surviving = cells[2] == "diagonal" || cells[2] == "kept";
    CHECK(surviving);
  }

  const auto manifest = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "run_manifest.json"));
  const auto& comp = manifest.at("compress");
  CHECK(long(rows.size()) - 1 == comp.at("nnz").get<long>());
  long total = 0;
  for (const auto& [name, count] : comp.at("stage_histogram").items()) total += count.get<long>();
  const long n = comp.at("n").get<long>();
  CHECK(total == n * n);
}

TEST_CASE("rank correlation helper matches hand values") {
  CHECK(spearman_rank({1, 2, 3, 4}, {10, 20, 30, 40}) == Catch::Approx(1.0));
  CHECK(spearman_rank({1, 2, 3, 4}, {9, 7, 5, 3}) == Catch::Approx(-1.0));
  CHECK(spearman_rank({1, 2, 3, 4}, {5, 5, 5, 5}) == 0.0);
  CHECK_THROWS_AS(spearman_rank({1.0}, {2.0}), std::invalid_argument);
  // ranks ignore monotone rescaling
  CHECK(spearman_rank({1, 4, 9, 16}, {0.1, 0.2, 0.3, 0.4}) == Catch::Approx(1.0));
}

TEST_CASE("bounds audit scores every bound family") {
  const WaveletFamily fam = build_family(1, 2);
  const Kernel kernel = make_kernel("single_layer", -1.0);
  QuadratureSpec spec;
  spec.rel_tol = 1e-5;
  const auto rows = run_bound_audit(fam, kernel, -0.5, spec, 2, 40, 7u);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].kind == "far_field");
  CHECK(rows[1].kind == "two_moment");
  CHECK(rows[2].kind == "long_face");
  CHECK(rows[3].kind == "near_field");
  for (const auto& r : rows) {
    INFO(r.kind);
    CHECK(r.pairs == 40);
    CHECK(r.fitted_c > 0.0);
    CHECK(r.median_ratio > 0.0);
    CHECK(r.max_ratio >= r.median_ratio);
    CHECK(r.spearman >= -1.0);
    CHECK(r.spearman <= 1.0);
  }
}

TEST_CASE("manifold demo stays inside the Lipschitz band") {
  RunConfig c = parse_config_text(
      "command=manifold-demo\ngeometry=two_patch_screen\nJ=2\nr_min=2\n");
  c.out_dir = fresh_dir("demo");
  REQUIRE(run_command(c) == 0);

  const auto manifest = nlohmann::json::parse(slurp(fs::path(c.out_dir) / "run_manifest.json"));
  const auto& demo = manifest.at("manifold_demo");
  CHECK(demo.at("patches") == 2);
  CHECK(demo.at("adjacency")[0][1] == "shared_edge");
  CHECK(demo.at("ratio_samples") == 200);
  CHECK(demo.at("ratio_in_band") == 200);

  const auto rows = lines_of(slurp(fs::path(c.out_dir) / "ratios.csv"));
  REQUIRE(rows.size() == 201);
  const double L = demo.at("lipschitz").get<double>();
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto cells = cells_of(rows[i]);
    REQUIRE(cells.size() == 6);
    const double ratio = std::stod(cells[5]);
    CHECK(ratio >= 1.0 / L - 0.06);
    CHECK(ratio <= L + 0.06);
  }

  // a geometry without cross-patch pairs produces an empty sample table
  RunConfig flat = parse_config_text("command=manifold-demo\ngeometry=unit_square\nJ=2\n");
  flat.out_dir = fresh_dir("demo_flat");
  REQUIRE(run_command(flat) == 0);
  const auto m2 = nlohmann::json::parse(slurp(fs::path(flat.out_dir) / "run_manifest.json"));
  CHECK(m2.at("manifold_demo").at("ratio_samples") == 0);
  CHECK(lines_of(slurp(fs::path(flat.out_dir) / "ratios.csv")).size() == 1);
}

TEST_CASE("basis-check reports machine-precision exactness") {
  RunConfig c = parse_config_text("command=basis-check\nfamily_order=2\nJ=4\n");
  c.out_dir = fresh_dir("basis");
  REQUIRE(run_command(c) == 0);

  const auto rows = lines_of(slurp(fs::path(c.out_dir) / "basis_check.csv"));
  REQUIRE(rows.size() == 2);
  const auto cells = cells_of(rows[1]);
  REQUIRE(cells.size() == 6);
  CHECK(std::stol(cells[2]) == 64);  // 2 * 2^(4+1) members
  CHECK(std::stod(cells[4]) <= 1e-12);
  CHECK(std::stod(cells[5]) <= 1e-12);
}
