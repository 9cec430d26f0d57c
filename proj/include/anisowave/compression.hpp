#ifndef ANISOWAVE_COMPRESSION_HPP
#define ANISOWAVE_COMPRESSION_HPP

// Keep/drop cascade that sparsifies the stiffness matrix. A pair of indices
// passes through four stages: a level-difference cutoff, a support-distance
// cutoff B, two mixed cutoffs (D, E) that combine one separated direction
// with one close one, and the singular-support cutoffs F. The first rule
// that fires decides, and its tag is recorded so dropped patterns can be
// audited stage by stage.
//
// s_star computes the compressibility rate the cascade is designed to reach;
// minimal_vanishing_moments inverts it, returning the smallest dual order
// for which the rate strictly beats the approximation rate s_bar.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>

#include "index_geometry.hpp"

namespace anisowave {

struct CompressionParams {
  double q = 0.0;            // half the operator order
  int d = 1;                 // primal polynomial order
  int d_tilde = 1;           // vanishing moments of the analysis side
  double gamma = 0.5;        // basis smoothness bound
  double sigma_shift = 10.0; // regularity window of the solution space
  double alpha = 1.2;        // rate slack factor, > 1
  double xi = 0.75;          // first-compression exponent, in (1/2, 1)
  double theta = 0.75;       // mixed-compression exponent, in (1/2, 1)
  int r = 0;                 // compression radius
};

inline void validate(const CompressionParams& p) {
  if (!(p.alpha > 1.0)) throw std::invalid_argument("compression: alpha must exceed 1");
  if (!(p.xi > 0.5 && p.xi < 1.0))
    throw std::invalid_argument("compression: xi must lie in (1/2, 1)");
  if (!(p.theta > 0.5 && p.theta < 1.0))
    throw std::invalid_argument("compression: theta must lie in (1/2, 1)");
  if (p.d_tilde + p.q < 0.0)
    throw std::invalid_argument("compression: d_tilde + q must be nonnegative");
  if (p.r < 0) throw std::invalid_argument("compression: radius r must be nonnegative");
}

struct RateParams {
  double s_bar = 0.0;  // best approximation rate of the anisotropic basis
  double nu = 0.0;     // smoothness margin entering the diagonal cutoff
};

inline RateParams rate_params(const CompressionParams& p) {
  validate(p);
  if (p.q >= 0.0) return {p.d - p.q, p.gamma - p.q};
  return {p.d - 0.5 * p.q, p.gamma};
}

// Largest rate s for which the dropped-entry perturbation stays within the
// discretization error. Returns -infinity when a positive-order operator has
// no smoothness margin left (nu <= 0), the "no finite dual order works" case.
inline double s_star(const CompressionParams& p) {
  const RateParams rp = rate_params(p);
  if (p.q > 0.0 && rp.nu <= 0.0) return -std::numeric_limits<double>::infinity();
  double third = 0.5 * p.d_tilde + p.q;
  if (p.q > 0.0) third -= std::max(0.0, p.q * p.alpha * rp.s_bar / rp.nu);
  return std::min({p.sigma_shift, p.alpha * rp.s_bar, third});
}

// Smallest d_tilde whose rate s_star strictly exceeds s_bar, or nullopt when
// no dual order up to max_d_tilde achieves that (notably q > 0 with nu <= 0).
inline std::optional<int> minimal_vanishing_moments(CompressionParams p, int max_d_tilde = 64) {
  const double target = rate_params(p).s_bar;
  for (int dt = 0; dt <= max_d_tilde; ++dt) {
    if (dt + p.q < 0.0) continue;
    p.d_tilde = dt;
    if (s_star(p) > target) return dt;
  }
  return std::nullopt;
}

using LevelPair = std::array<int, 2>;

// First-compression cutoff: pairs whose supports are at least B apart drop.
inline double cutoff_B(const LevelPair& j, const LevelPair& j2, const CompressionParams& p) {
  validate(p);
  const int mx = std::min(j[0], j2[0]), my = std::min(j[1], j2[1]);
  const int m = std::min(mx, my);
  const int dinf = std::max(std::abs(j[0] - j2[0]), std::abs(j[1] - j2[1]));
  const double spread = std::exp2(-0.5 * (mx + my) + p.xi * (0.5 * p.r - dinf));
  return std::max(std::exp2(double(-m)), spread);
}

// Mixed 4/3 cutoff for one direction: separation threshold for the direction
// that is far while the other direction stays within one coarse mesh width.
inline double cutoff_D(const LevelPair& j, const LevelPair& j2, const CompressionParams& p,
                       Axis z) {
  validate(p);
  const int i = int(z);
  const int mz = std::min(j[i], j2[i]);
  const int dj = std::abs(j[i] - j2[i]);
  return std::exp2(double(-mz)) * std::max(1.0, std::exp2(p.theta * (0.5 * p.r - dj)));
}

// Mixed 5/3 cutoff: singular-support threshold, defined only when the level
// gap in the chosen direction reaches r/2 (the lemma's standing assumption).
inline double cutoff_E(const LevelPair& j, const LevelPair& j2, const CompressionParams& p,
                       Axis z) {
  validate(p);
  const int i = int(z);
  const int dj = std::abs(j[i] - j2[i]);
  if (2 * dj < p.r)
    throw std::invalid_argument("cutoff_E: requires |j_z - j_z'| >= r/2 in the chosen direction");
  const int mz = std::min(j[i], j2[i]);
  return std::exp2(-double(mz) + 0.5 * p.r - dj);
}

// Second-compression cutoff. The formula depends on where the level maxima
// of the two indices sit: if both are attained in the same direction (the
// aligned cases) the single-direction formula applies with the quantities of
// the requested direction; otherwise the symmetric mixed form applies. When
// both directions attain the maxima (j_x = j_y on each side) the aligned
// formulas coincide, so the arbitrary preference for x is value-neutral.
inline double cutoff_F(const LevelPair& j, const LevelPair& j2, const CompressionParams& p,
                       Axis z) {
  validate(p);
  const int linf_a = std::max(j[0], j[1]), linf_b = std::max(j2[0], j2[1]);
  const bool aligned_x = linf_a == j[0] && linf_b == j2[0];
  const bool aligned_y = linf_a == j[1] && linf_b == j2[1];
  if (aligned_x || aligned_y) {
    const int i = int(z);
    const int mz = std::min(j[i], j2[i]);
    const int dj = std::abs(j[i] - j2[i]);
    return std::exp2(-double(mz) + 0.5 * p.r - dj);
  }
  const int mx = std::min(j[0], j2[0]), my = std::min(j[1], j2[1]);
  const int d1 = std::abs(j[0] - j2[0]) + std::abs(j[1] - j2[1]);
  return std::exp2(-0.5 * (mx + my) + 0.5 * (p.r - d1));
}

enum class Stage : int {
  diagonal = 0,
  first,
  mixed_43_x,
  mixed_43_y,
  mixed_53_x,
  mixed_53_y,
  second_x,
  second_y,
  kept,
};

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::diagonal: return "diagonal";
    case Stage::first: return "first";
    case Stage::mixed_43_x: return "mixed_43_x";
    case Stage::mixed_43_y: return "mixed_43_y";
    case Stage::mixed_53_x: return "mixed_53_x";
    case Stage::mixed_53_y: return "mixed_53_y";
    case Stage::second_x: return "second_x";
    case Stage::second_y: return "second_y";
    case Stage::kept: return "kept";
  }
  throw std::invalid_argument("stage_name: unknown stage");
}

struct KeepDecision {
  bool kept = false;
  Stage stage = Stage::kept;
};

// Runs the cascade for a same-chart pair and reports the first rule that
// fired (ties at cutoff equality drop). Scaling members ride through as
// level-0 indices with no special casing; cross-chart routing is the
// caller's job.
// Geometric inputs for the cascade, expressed in whatever chart the caller
// works in. On the unit square these come straight from the index pair; glued
// multi-patch charts supply transformed values instead.
struct PairData {
  LevelPair ja{0, 0}, jb{0, 0};
  double dx = 0.0, dy = 0.0;  // directional support gaps
  double sx = 0.0, sy = 0.0;  // singular-support separations
};

// Which per-direction rules a caller permits; cross-patch charts switch some
// of them off because their error analysis only covers a subset.
struct StageMask {
  bool mixed_43 = true;
  bool mixed_53 = true;
  bool second_x = true;
  bool second_y = true;
};

inline KeepDecision keep_entry_core(const PairData& d, const CompressionParams& p,
                                    const StageMask& mask = {}) {
  validate(p);
  const LevelPair ja = d.ja, jb = d.jb;
  const int djx = std::abs(ja[0] - jb[0]), djy = std::abs(ja[1] - jb[1]);
  const int dinf = std::max(djx, djy);

  const RateParams rp = rate_params(p);
  // With no smoothness margin the radius formula is void; only level-aligned
  // pairs pass, which keeps diagonal entries alive regardless of parameters.
  const double radius = rp.nu > 0.0 ? p.alpha * p.r * rp.s_bar / rp.nu : 0.0;
  if (double(dinf) > radius) return {false, Stage::diagonal};

  if (std::hypot(d.dx, d.dy) >= cutoff_B(ja, jb, p)) return {false, Stage::first};

  const double hx = std::exp2(double(-std::min(ja[0], jb[0])));
  const double hy = std::exp2(double(-std::min(ja[1], jb[1])));

  if (mask.mixed_43) {
    if (d.dx >= cutoff_D(ja, jb, p, Axis::x) && d.dy <= hy) return {false, Stage::mixed_43_x};
    if (d.dy >= cutoff_D(ja, jb, p, Axis::y) && d.dx <= hx) return {false, Stage::mixed_43_y};
  }

  if (mask.mixed_53) {
    if (2 * djx >= p.r) {
      if (hx >= d.sx && d.sx >= cutoff_E(ja, jb, p, Axis::x) && hy <= d.dy)
        return {false, Stage::mixed_53_x};
    }
    if (2 * djy >= p.r) {
      if (hy >= d.sy && d.sy >= cutoff_E(ja, jb, p, Axis::y) && hx <= d.dx)
        return {false, Stage::mixed_53_y};
    }
  }

  if (mask.second_x && hx >= d.sx && d.sx >= cutoff_F(ja, jb, p, Axis::x) && hy >= d.dy)
    return {false, Stage::second_x};
  if (mask.second_y && hy >= d.sy && d.sy >= cutoff_F(ja, jb, p, Axis::y) && hx >= d.dx)
    return {false, Stage::second_y};

  return {true, Stage::kept};
}

inline KeepDecision keep_entry(const MultiIndex& a, const MultiIndex& b,
                               const CompressionParams& p) {
  PairData d;
  d.ja = {a.x.j, a.y.j};
  d.jb = {b.x.j, b.y.j};
  d.dx = delta_x(a, b);
  d.dy = delta_y(a, b);
  d.sx = sigma_x(a, b);
  d.sy = sigma_y(a, b);
  return keep_entry_core(d, p);
}

}  // namespace anisowave

#endif
