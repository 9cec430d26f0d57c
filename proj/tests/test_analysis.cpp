#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "anisowave/analysis.hpp"

using namespace anisowave;

namespace {

// Independent reference for the largest singular value: one-sided Jacobi
// sweeps orthogonalize column pairs; after convergence the singular values
// are the column norms.
double svd_max_oracle(std::vector<std::vector<double>> a) {
  const size_t n = a.size();
  auto col_dot = [&](size_t p, size_t q) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i][p] * a[i][q];
    return s;
  };
  bool changed = true;
  for (int sweep = 0; changed && sweep < 60; ++sweep) {
    changed = false;
    for (size_t p = 0; p + 1 < n; ++p)
      for (size_t q = p + 1; q < n; ++q) {
        const double alpha = col_dot(p, p), beta = col_dot(q, q), gamma = col_dot(p, q);
        if (std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
        changed = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t =
            (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (size_t i = 0; i < n; ++i) {
          const double ap = a[i][p], aq = a[i][q];
          a[i][p] = c * ap - s * aq;
          a[i][q] = s * ap + c * aq;
        }
      }
  }
  double best = 0.0;
  for (size_t q = 0; q < n; ++q) best = std::max(best, std::sqrt(col_dot(q, q)));
  return best;
}

DenseMatrix to_dense(const std::vector<std::vector<double>>& a) {
  DenseMatrix m;
  m.n = long(a.size());
  for (const auto& row : a)
    for (double x : row) m.a.push_back(x);
  return m;
}

MultiIndex widx(int jx, int kx, int jy, int ky) {
  MultiIndex m;
  m.x = {Kind1D::wavelet, jx, kx, 0};
  m.y = {Kind1D::wavelet, jy, ky, 0};
  return m;
}

CompressionParams haar_params(double q, double r) {
  CompressionParams p;
  p.q = q;
  p.d = 1;
  p.d_tilde = 1;
  p.gamma = 0.5;
  p.r = r;
  return p;
}

QuadratureSpec quick_spec() {
  QuadratureSpec s;
  s.rel_tol = 1e-6;
  return s;
}

}  // namespace

TEST_CASE("spectral norm reproduces known matrices") {
  std::vector<std::vector<double>> id(5, std::vector<double>(5, 0.0));
  for (int i = 0; i < 5; ++i) id[size_t(i)][size_t(i)] = 1.0;
  const DenseMatrix mid = to_dense(id);
  const NormEstimate e1 = spectral_norm(matrix_map(mid));
  CHECK(e1.converged);
  CHECK(e1.value == Catch::Approx(1.0).epsilon(1e-12));

  std::vector<std::vector<double>> dg(3, std::vector<double>(3, 0.0));
  dg[0][0] = 3.0;
  dg[1][1] = 1.0;
  dg[2][2] = 0.5;
  const DenseMatrix mdg = to_dense(dg);
  const NormEstimate e2 = spectral_norm(matrix_map(mdg), 40, 1e-12);
  CHECK(e2.converged);
  CHECK(e2.value == Catch::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("spectral norm agrees with the one-sided Jacobi oracle") {
  std::mt19937 rng(2024u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> a(8, std::vector<double>(8));
  for (auto& row : a)
    for (double& x : row) x = u(rng);
  const double ref = svd_max_oracle(a);
  REQUIRE(ref > 0.5);  // guards against a degenerate draw
  const DenseMatrix m = to_dense(a);
  const NormEstimate est = spectral_norm(matrix_map(m), 400, 1e-12);
  CHECK(est.value == Catch::Approx(ref).epsilon(1e-6));
}

TEST_CASE("spectral norm is invariant under transposition") {
  std::mt19937 rng(77u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> a(12, std::vector<double>(12));
  for (auto& row : a)
    for (double& x : row) x = u(rng);
  const DenseMatrix m = to_dense(a);
  const LinearMap fwd = matrix_map(m);
  LinearMap swapped = fwd;
  std::swap(swapped.forward, swapped.transpose);
  const double n1 = spectral_norm(fwd, 400, 1e-12).value;
  const double n2 = spectral_norm(swapped, 400, 1e-12).value;
  CHECK(n1 == Catch::Approx(n2).epsilon(1e-8));
}

TEST_CASE("spectral norm flags non-convergence instead of throwing") {
  std::vector<std::vector<double>> dg(3, std::vector<double>(3, 0.0));
  dg[0][0] = 2.0;
  dg[1][1] = 1.9;
  dg[2][2] = 1.0;
  const DenseMatrix m = to_dense(dg);
  const NormEstimate est = spectral_norm(matrix_map(m), 5, 1e-15);
  CHECK_FALSE(est.converged);
  CHECK(est.iters_used == 5);
  CHECK(est.value > 1.89);
  CHECK(est.value < 2.0 + 1e-12);

  CHECK_THROWS_AS(spectral_norm(matrix_map(m), 4, 1e-3), std::invalid_argument);

  LinearMap zero;
  zero.n = 4;
  zero.forward = [](const std::vector<double>& v) {
    return std::vector<double>(v.size(), 0.0);
  };
  zero.transpose = zero.forward;
  const NormEstimate ez = spectral_norm(zero);
  CHECK(ez.converged);
  CHECK(ez.value == 0.0);
}

TEST_CASE("compressed-map transpose agrees with the dense expansion") {
  const WaveletFamily haar = build_family(1, 2);
  const BasisWindow w = build_window(haar, 1);
  const Kernel k = make_kernel("single_layer", -1.0);
  CompressionParams p = haar_params(-0.5, 1.0);
  const CompressedOperator op = assemble_compressed(w, k, p, quick_spec());

  DenseMatrix d;
  d.n = op.n;
  d.a.assign(size_t(op.n) * size_t(op.n), 0.0);
  for (long i = 0; i < op.n; ++i)
    for (long s = op.row_ptr[size_t(i)]; s < op.row_ptr[size_t(i) + 1]; ++s)
      d.at(i, op.col[size_t(s)]) = op.val[size_t(s)];

  std::mt19937 rng(5u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(size_t(op.n));
  for (double& x : v) x = u(rng);

  const LinearMap ms = matrix_map(op);
  const LinearMap md = matrix_map(d);
  const std::vector<double> f1 = ms.forward(v), f2 = md.forward(v);
  const std::vector<double> t1 = ms.transpose(v), t2 = md.transpose(v);
  for (size_t i = 0; i < v.size(); ++i) {
    CHECK(f1[i] == Catch::Approx(f2[i]).margin(1e-13));
    CHECK(t1[i] == Catch::Approx(t2[i]).margin(1e-13));
  }
}

TEST_CASE("schur tail vanishes when nothing is dropped") {
  const WaveletFamily haar = build_family(1, 2);
  const BasisWindow w = build_window(haar, 1);
  const Kernel k = make_kernel("single_layer", -1.0);
  CompressionParams p = haar_params(-0.5, 12.0);

  const DenseMatrix full = assemble_full(w, k, p.q, quick_spec());
  CHECK(schur_weighted_tail(w, full, p) == 0.0);
  CHECK(schur_weighted_tail(w, k, p, quick_spec()) == 0.0);
}

TEST_CASE("schur tail applies the level weight per row") {
  // Two indices at levels (2,2) and (3,3); with r = 0 the off-diagonal pair
  // is dropped by the level-difference gate, so the tail reduces to a single
  // weighted entry per row.
  BasisWindow w;
  w.family = build_family(1, 4);
  w.J = 4;
  w.indices = {widx(2, 0, 2, 0), widx(3, 1, 3, 1)};

  DenseMatrix full;
  full.n = 2;
  full.a = {0.0, 0.8, 0.0, 0.0};
  CompressionParams p = haar_params(0.0, 0.0);

  // row 0 sees 2^{(4-6)/2} * 0.8 = 0.4, row 1 sees nothing
  CHECK(schur_weighted_tail(w, full, p) == Catch::Approx(0.4).epsilon(1e-14));

  full.a = {0.0, 0.8, 0.3, 0.0};
  // row 1 now carries 2^{(6-4)/2} * 0.3 = 0.6 and wins the max
  CHECK(schur_weighted_tail(w, full, p) == Catch::Approx(0.6).epsilon(1e-14));

  const double only_first =
      schur_weighted_tail(w, full, p, [](Stage s) { return s == Stage::first; });
  CHECK(only_first == 0.0);
  const double only_diag =
      schur_weighted_tail(w, full, p, [](Stage s) { return s == Stage::diagonal; });
  CHECK(only_diag == Catch::Approx(0.6).epsilon(1e-14));
}

TEST_CASE("matrix-free and cached schur tails agree") {
  const WaveletFamily haar = build_family(1, 2);
  const BasisWindow w = build_window(haar, 2);
  const Kernel k = make_kernel("single_layer", -1.0);
  CompressionParams p = haar_params(-0.5, 2.0);
  const QuadratureSpec spec = quick_spec();

  const DenseMatrix full = assemble_full(w, k, p.q, spec);
  const double cached = schur_weighted_tail(w, full, p);
  const double direct = schur_weighted_tail(w, k, p, spec);
  REQUIRE(cached > 0.0);
  CHECK(direct == Catch::Approx(cached).epsilon(1e-13));
}

TEST_CASE("decay slope fits recover planted rates") {
  const std::vector<int> rs = {2, 3, 4, 5};
  std::vector<double> es;
  for (int r : rs) es.push_back(std::exp2(-double(r)));
  CHECK(fit_decay(rs, es) == Catch::Approx(1.0).epsilon(1e-12));

  es.clear();
  for (int r : rs) es.push_back(4.0 * std::exp2(-1.5 * double(r)));
  CHECK(fit_decay(rs, es) == Catch::Approx(1.5).epsilon(1e-12));

  const std::vector<int> wide = {0, 1, 2, 3, 4, 5, 6};
  std::vector<double> mixed;
  for (int r : wide) mixed.push_back((r == 0 ? 1.0 : double(r)) * std::exp2(-double(r)));
  const double slope = fit_decay(wide, mixed);  // r in {0,1} excluded internally
  CHECK(slope > 0.6);
  CHECK(slope < 1.0);

  CHECK_THROWS_AS(fit_decay({0, 1, 2}, {1.0, 0.5, 0.25}), std::invalid_argument);
  CHECK_THROWS_AS(fit_decay({2, 3, 4}, {1.0, 0.0, 0.25}), std::invalid_argument);
  CHECK_THROWS_AS(fit_decay({2, 3}, {1.0, 0.5}), std::invalid_argument);
}

TEST_CASE("isotropic sequence norm matches hand sums") {
  std::vector<Coefficient> one = {{widx(2, 0, 1, 0), 1.0}};  // |j|_inf = 2
  CHECK(sobolev_seq_norm(one, 1.0) == Catch::Approx(4.0).epsilon(1e-14));

  std::vector<Coefficient> field;
  std::mt19937 rng(9u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double l2 = 0.0;
  for (int i = 0; i < 30; ++i) {
    const double c = u(rng);
    field.push_back({widx(i % 4, 0, (i + 1) % 3, 0), c});
    l2 += c * c;
  }
  CHECK(sobolev_seq_norm(field, 0.0) == Catch::Approx(std::sqrt(l2)).epsilon(1e-13));

  std::vector<Coefficient> pair = {{widx(0, 0, 0, 0), 1.0}, {widx(3, 0, 3, 0), 1.0}};
  CHECK(sobolev_seq_norm(pair, 0.5) == Catch::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("tensor-weighted sequence norm matches hand sums") {
  std::vector<Coefficient> one = {{widx(1, 0, 2, 0), 1.0}};
  // weight 2^{2*1*2 + 2*(0.5*1 + 0.25*2)} = 2^6, norm 8
  CHECK(gk_seq_norm(one, 1.0, {0.5, 0.25}) == Catch::Approx(8.0).epsilon(1e-14));

  std::vector<Coefficient> field;
  std::mt19937 rng(10u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double l2 = 0.0, aniso = 0.0;
  for (int i = 0; i < 30; ++i) {
    const double c = u(rng);
    const int jx = i % 4, jy = (i + 2) % 3;
    field.push_back({widx(jx, 0, jy, 0), c});
    l2 += c * c;
    aniso += std::exp2(2.0 * 0.75 * jx) * c * c;  // q = 0, s = (0.75, 0)
  }
  CHECK(gk_seq_norm(field, 0.0, {0.0, 0.0}) == Catch::Approx(std::sqrt(l2)).epsilon(1e-13));
  CHECK(gk_seq_norm(field, 0.0, {0.75, 0.0}) ==
        Catch::Approx(std::sqrt(aniso)).epsilon(1e-13));
}

TEST_CASE("tau seminorm matches hand sums and stays finite on a window") {
  // s = 1/2 gives tau = 1: plain weighted absolute sum
  std::vector<Coefficient> two = {{widx(1, 0, 1, 0), -0.5}, {widx(2, 0, 0, 0), 0.25}};
  CHECK(besov_tau_seminorm(two, 1.0, 0.5) == Catch::Approx(2.0).epsilon(1e-14));

  std::vector<Coefficient> unit = {{widx(2, 1, 3, 0), 1.0}};
  for (double s : {0.3, 1.0, 2.5})
    CHECK(besov_tau_seminorm(unit, 0.0, s) == Catch::Approx(1.0).epsilon(1e-13));

  CHECK_THROWS_AS(besov_tau_seminorm(two, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(besov_tau_seminorm(two, 0.0, -1.0), std::invalid_argument);

  const WaveletFamily haar = build_family(1, 4);
  const BasisWindow w = build_window(haar, 4);
  std::vector<Coefficient> geo;
  for (const MultiIndex& m : w.indices) geo.push_back({m, std::exp2(-2.0 * level_linf(m))});
  double prev = 0.0;
  for (double s : {0.5, 1.0, 1.5}) {
    const double val = besov_tau_seminorm(geo, 0.0, s);
    CHECK(std::isfinite(val));
    // larger s means smaller tau, and l^tau quasi-norms grow as tau shrinks
    CHECK(val > prev);
    prev = val;
  }
}

TEST_CASE("dropped-part norm from the matrix-free apply matches the dense difference") {
  const WaveletFamily haar = build_family(1, 1);
  const BasisWindow w = build_window(haar, 1);
  const Kernel k = make_kernel("single_layer", -1.0);
  CompressionParams p = haar_params(-0.5, 0.0);  // r = 0 drops every level-crossing pair
  const QuadratureSpec spec = quick_spec();

  const DenseMatrix full = assemble_full(w, k, p.q, spec);
  const CompressedOperator op = assemble_compressed(w, k, p, spec);
  REQUIRE(op.nnz() < full.n * full.n);

  DenseMatrix diff = full;
  for (long i = 0; i < op.n; ++i)
    for (long s = op.row_ptr[size_t(i)]; s < op.row_ptr[size_t(i) + 1]; ++s)
      diff.at(i, op.col[size_t(s)]) -= op.val[size_t(s)];

  LinearMap dropped;
  dropped.n = w.size();
  dropped.forward = [&](const std::vector<double>& v) {
    return dropped_apply(w, k, p, spec, v);
  };
  dropped.transpose = dropped.forward;  // canonical-pair evaluation is symmetric

  const double tol = 1e-3;
  const double n_dense = spectral_norm(matrix_map(diff), 20, tol).value;
  const double n_free = spectral_norm(dropped, 20, tol).value;
  REQUIRE(n_dense > 0.0);
  CHECK(std::abs(n_free - n_dense) <= 2.0 * tol * std::max(n_free, n_dense));
}

TEST_CASE("best-N-term errors are non-increasing") {
  std::vector<Coefficient> field;
  std::mt19937 rng(31u);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double l2 = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double c = u(rng);
    field.push_back({widx(i % 5, 0, i % 3, 0), c});
    l2 += c * c;
  }
  const std::vector<double> tail = best_n_term_errors(field);
  REQUIRE(tail.size() == 201);
  CHECK(tail.front() == Catch::Approx(std::sqrt(l2)).epsilon(1e-13));
  CHECK(tail.back() == 0.0);
  for (size_t i = 0; i + 1 < tail.size(); ++i) CHECK(tail[i] >= tail[i + 1]);
}
