#ifndef ANISOWAVE_ANALYSIS_HPP
#define ANISOWAVE_ANALYSIS_HPP

// Measurement layer: spectral norms of matrix-free maps, level-weighted Schur
// tails over dropped entries, decay-slope fits, and the weighted sequence
// norms used to classify coefficient fields. Everything here is deterministic
// so measured curves can be regression-pinned.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "assembly.hpp"

namespace anisowave {

struct LinearMap {
  long n = 0;
  std::function<std::vector<double>(const std::vector<double>&)> forward;
  std::function<std::vector<double>(const std::vector<double>&)> transpose;
};

inline LinearMap matrix_map(const DenseMatrix& m) {
  LinearMap lm;
  lm.n = m.n;
  lm.forward = [&m](const std::vector<double>& v) { return apply(m, v); };
  lm.transpose = [&m](const std::vector<double>& v) {
    std::vector<double> out(v.size(), 0.0);
    for (long i = 0; i < m.n; ++i)
      for (long j = 0; j < m.n; ++j) out[size_t(j)] += m.at(i, j) * v[size_t(i)];
    return out;
  };
  return lm;
}

inline LinearMap matrix_map(const CompressedOperator& op) {
  LinearMap lm;
  lm.n = op.n;
  lm.forward = [&op](const std::vector<double>& v) { return apply(op, v); };
  lm.transpose = [&op](const std::vector<double>& v) {
    std::vector<double> out(v.size(), 0.0);
    for (long i = 0; i < op.n; ++i)
      for (long s = op.row_ptr[size_t(i)]; s < op.row_ptr[size_t(i) + 1]; ++s)
        out[size_t(op.col[size_t(s)])] += op.val[size_t(s)] * v[size_t(i)];
    return out;
  };
  return lm;
}

struct NormEstimate {
  double value = 0.0;
  bool converged = false;
  int iters_used = 0;
};

// Power iteration on the normal map v -> A^T(A v) from a fixed-seed random
// start. Non-convergence is reported through the flag, never thrown: the
// estimate still lower-bounds the norm and feeds into generous slope fits.
inline NormEstimate spectral_norm(const LinearMap& m, int iters = 20, double tol = 1e-3) {
  if (iters < 5) throw std::invalid_argument("spectral_norm: need at least 5 iterations");
  if (m.n <= 0) return {0.0, true, 0};
  std::mt19937 rng(987654321u);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(size_t(m.n));
  for (double& x : v) x = u(rng);
  double nv = 0.0;
  for (double x : v) nv += x * x;
  nv = std::sqrt(nv);
  for (double& x : v) x /= nv;

  NormEstimate est;
  double prev = -1.0;
  for (int it = 1; it <= iters; ++it) {
    const std::vector<double> w = m.transpose(m.forward(v));
    double rayleigh = 0.0, nw = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
      rayleigh += v[i] * w[i];
      nw += w[i] * w[i];
    }
    nw = std::sqrt(nw);
    est.value = std::sqrt(std::max(0.0, rayleigh));
    est.iters_used = it;
    if (nw == 0.0) {  // v is annihilated: the norm estimate is exact at zero
      est.value = 0.0;
      est.converged = true;
      return est;
    }
    if (prev >= 0.0 && std::abs(est.value - prev) <= tol * std::max(est.value, 1e-300)) {
      est.converged = true;
      return est;
    }
    prev = est.value;
    for (size_t i = 0; i < v.size(); ++i) v[i] = w[i] / nw;
  }
  return est;
}

inline double level_weight(const MultiIndex& row, const MultiIndex& col) {
  return std::exp2(0.5 * (level_l1(row) - level_l1(col)));
}

// Max over rows of the level-weighted absolute sum of dropped entries, with
// entries drawn from a precomputed dense section. An optional stage filter
// narrows the sum to particular drop rules.
inline double schur_weighted_tail(const BasisWindow& w, const DenseMatrix& full,
                                  const CompressionParams& p,
                                  const std::function<bool(Stage)>& stage_filter = {}) {
  validate(p);
  const long n = w.size();
  if (full.n != n) throw std::invalid_argument("schur_weighted_tail: window/matrix mismatch");
  std::vector<double> row_sum(size_t(n), 0.0);
  for (long i = 0; i < n; ++i)
    for (long j = i; j < n; ++j) {
      const KeepDecision dec = keep_entry(w.indices[i], w.indices[j], p);
      if (dec.kept) continue;
      if (stage_filter && !stage_filter(dec.stage)) continue;
      const double e = std::abs(full.at(i, j));
      row_sum[size_t(i)] += level_weight(w.indices[i], w.indices[j]) * e;
      if (i != j)
        row_sum[size_t(j)] += level_weight(w.indices[j], w.indices[i]) * std::abs(full.at(j, i));
    }
  double mx = 0.0;
  for (double s : row_sum) mx = std::max(mx, s);
  return mx;
}

// Matrix-free variant: evaluates dropped entries on the fly.
inline double schur_weighted_tail(const BasisWindow& w, const Kernel& kernel,
                                  const CompressionParams& p, const QuadratureSpec& spec,
                                  const std::function<bool(Stage)>& stage_filter = {}) {
  validate(p);
  const long n = w.size();
  EntryEngine eng(w.family, kernel, p.q, spec);
  std::vector<double> row_sum(size_t(n), 0.0);
  for (long i = 0; i < n; ++i)
    for (long j = i; j < n; ++j) {
      const KeepDecision dec = keep_entry(w.indices[i], w.indices[j], p);
      if (dec.kept) continue;
      if (stage_filter && !stage_filter(dec.stage)) continue;
      const double e = std::abs(eng.entry(w.indices[i], w.indices[j]));
      row_sum[size_t(i)] += level_weight(w.indices[i], w.indices[j]) * e;
      if (i != j) row_sum[size_t(j)] += level_weight(w.indices[j], w.indices[i]) * e;
    }
  double mx = 0.0;
  for (double s : row_sum) mx = std::max(mx, s);
  return mx;
}

// Least-squares slope of -log2(e) against r, with the preasymptotic radii
// r in {0, 1} excluded before fitting.
inline double fit_decay(const std::vector<int>& rs, const std::vector<double>& es) {
  if (rs.size() != es.size()) throw std::invalid_argument("fit_decay: length mismatch");
  std::vector<double> x, y;
  for (size_t i = 0; i < rs.size(); ++i) {
    if (!(es[i] > 0.0)) throw std::invalid_argument("fit_decay: values must be positive");
    if (rs[i] <= 1) continue;
    x.push_back(double(rs[i]));
    y.push_back(-std::log2(es[i]));
  }
  if (x.size() < 3)
    throw std::invalid_argument("fit_decay: need at least 3 points beyond r = 1");
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(x.size());
  my /= double(x.size());
  double cov = 0.0, var = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    cov += (x[i] - mx) * (y[i] - my);
    var += (x[i] - mx) * (x[i] - mx);
  }
  return cov / var;
}

struct Coefficient {
  MultiIndex idx;
  double value = 0.0;
};

inline double sobolev_seq_norm(const std::vector<Coefficient>& coeffs, double s) {
  double acc = 0.0;
  for (const Coefficient& c : coeffs)
    acc += std::exp2(2.0 * s * level_linf(c.idx)) * c.value * c.value;
  return std::sqrt(acc);
}

// Anisotropic weight 2^{2q|j|_inf + 2(s_x j_x + s_y j_y)} on the squares.
inline double gk_seq_norm(const std::vector<Coefficient>& coeffs, double q,
                          const std::array<double, 2>& s) {
  double acc = 0.0;
  for (const Coefficient& c : coeffs) {
    const double e = 2.0 * q * level_linf(c.idx) + 2.0 * (s[0] * c.idx.x.j + s[1] * c.idx.y.j);
    acc += std::exp2(e) * c.value * c.value;
  }
  return std::sqrt(acc);
}

inline double besov_tau_seminorm(const std::vector<Coefficient>& coeffs, double q, double s) {
  if (!(s > 0.0)) throw std::invalid_argument("besov_tau_seminorm: s must be positive");
  const double tau = 1.0 / (s + 0.5);
  double acc = 0.0;
  for (const Coefficient& c : coeffs)
    acc += std::exp2(tau * q * level_linf(c.idx)) * std::pow(std::abs(c.value), tau);
  return std::pow(acc, 1.0 / tau);
}

// l2 tail after keeping the N largest coefficients, for N = 0..len. The
// sequence is non-increasing by construction and underpins best-N-term
// sanity checks against the Besov ordering.
inline std::vector<double> best_n_term_errors(const std::vector<Coefficient>& coeffs) {
  std::vector<double> mags;
  for (const Coefficient& c : coeffs) mags.push_back(std::abs(c.value));
  std::sort(mags.begin(), mags.end(), std::greater<double>());
  std::vector<double> tail(mags.size() + 1, 0.0);
  for (size_t i = mags.size(); i-- > 0;) tail[i] = tail[i + 1] + mags[i] * mags[i];
  for (double& t : tail) t = std::sqrt(t);
  return tail;
}

}  // namespace anisowave

#endif
