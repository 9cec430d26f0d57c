#ifndef ANISOWAVE_INDEX_GEOMETRY_HPP
#define ANISOWAVE_INDEX_GEOMETRY_HPP

// Tensor-product indices lambda = (lambda_x, lambda_y) with independent
// directional levels, and the geometry functionals the compression rules
// are written in: directional/Euclidean support distances and the distance
// from the finer support to the coarser singular support.

#include "basis1d.hpp"

namespace anisowave {

enum class Axis : int { x = 0, y = 1 };

struct MultiIndex {
  int patch = 0;
  Member1D x, y;
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

inline int level_l1(const MultiIndex& a) { return a.x.j + a.y.j; }
inline int level_linf(const MultiIndex& a) { return std::max(a.x.j, a.y.j); }

struct LevelStats {
  int mx = 0, my = 0, m = 0;  // directional and overall minima
  int Mx = 0, My = 0, M = 0;  // directional and overall maxima
};

inline LevelStats level_stats(const MultiIndex& a, const MultiIndex& b) {
  LevelStats s;
  s.mx = std::min(a.x.j, b.x.j);
  s.my = std::min(a.y.j, b.y.j);
  s.m = std::min(s.mx, s.my);
  s.Mx = std::max(a.x.j, b.x.j);
  s.My = std::max(a.y.j, b.y.j);
  s.M = std::max(s.Mx, s.My);
  return s;
}

inline double interval_dist(double lo1, double hi1, double lo2, double hi2) {
  if (lo2 > hi1) return lo2 - hi1;
  if (lo1 > hi2) return lo1 - hi2;
  return 0.0;
}

inline const Member1D& dir(const MultiIndex& a, Axis z) {
  return z == Axis::x ? a.x : a.y;
}

inline double delta_dir(const MultiIndex& a, const MultiIndex& b, Axis z) {
  const Member1D &ma = dir(a, z), &mb = dir(b, z);
  return interval_dist(support_lo(ma), support_hi(ma), support_lo(mb), support_hi(mb));
}

inline double delta_x(const MultiIndex& a, const MultiIndex& b) { return delta_dir(a, b, Axis::x); }
inline double delta_y(const MultiIndex& a, const MultiIndex& b) { return delta_dir(a, b, Axis::y); }

// Euclidean distance between the (axis-aligned box) supports
inline double delta(const MultiIndex& a, const MultiIndex& b) {
  return std::hypot(delta_x(a, b), delta_y(a, b));
}

inline double dist_points_interval(const std::vector<double>& pts, double lo, double hi) {
  double d = std::numeric_limits<double>::infinity();
  for (double p : pts) {
    if (p < lo)
      d = std::min(d, lo - p);
    else if (p > hi)
      d = std::min(d, p - hi);
    else
      return 0.0;
  }
  return d;
}

// Piece breakpoints of a member, derived from its kind alone: every mother in
// this construction splits exactly once at the support midpoint and every
// scaling function is a single polynomial piece, so the singular support does
// not depend on the order. Lets index-level logic run without a realized
// family at hand.
inline int member_kinks(const Member1D& m, double out[3]) {
  const double lo = support_lo(m), hi = support_hi(m);
  out[0] = lo;
  if (m.kind == Kind1D::scaling) {
    out[1] = hi;
    return 2;
  }
  out[1] = 0.5 * (lo + hi);
  out[2] = hi;
  return 3;
}

// Distance from the finer member's support to the coarser member's singular
// support (piece breakpoints including endpoints). At equal levels both
// orientations are evaluated and the smaller value is taken, which keeps the
// functional symmetric in its arguments.
inline double sigma_dir(const MultiIndex& a, const MultiIndex& b, Axis z) {
  const Member1D &ma = dir(a, z), &mb = dir(b, z);
  auto one_way = [&](const Member1D& fine, const Member1D& coarse) {
    double pts[3];
    const int n = member_kinks(coarse, pts);
    const double lo = support_lo(fine), hi = support_hi(fine);
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      if (pts[i] < lo)
        d = std::min(d, lo - pts[i]);
      else if (pts[i] > hi)
        d = std::min(d, pts[i] - hi);
      else
        return 0.0;
    }
    return d;
  };
  if (ma.j > mb.j) return one_way(ma, mb);
  if (mb.j > ma.j) return one_way(mb, ma);
  return std::min(one_way(ma, mb), one_way(mb, ma));
}
inline double sigma_x(const MultiIndex& a, const MultiIndex& b) { return sigma_dir(a, b, Axis::x); }
inline double sigma_y(const MultiIndex& a, const MultiIndex& b) { return sigma_dir(a, b, Axis::y); }

inline double sigma_dir(const WaveletFamily& fam, const MultiIndex& a, const MultiIndex& b,
                        Axis z) {
  const Member1D &ma = dir(a, z), &mb = dir(b, z);
  auto one_way = [&](const Member1D& fine, const Member1D& coarse) {
    return dist_points_interval(singular_support(fam, coarse), support_lo(fine),
                                support_hi(fine));
  };
  if (ma.j > mb.j) return one_way(ma, mb);
  if (mb.j > ma.j) return one_way(mb, ma);
  return std::min(one_way(ma, mb), one_way(mb, ma));
}

inline double sigma_x(const WaveletFamily& fam, const MultiIndex& a, const MultiIndex& b) {
  return sigma_dir(fam, a, b, Axis::x);
}
inline double sigma_y(const WaveletFamily& fam, const MultiIndex& a, const MultiIndex& b) {
  return sigma_dir(fam, a, b, Axis::y);
}

}  // namespace anisowave

#endif
