#ifndef ANISOWAVE_MANIFOLD_HPP
#define ANISOWAVE_MANIFOLD_HPP

// Patchwise parametrized surfaces: charts glued across shared edges or
// vertices, distances transported into the glued coordinates, pulled-back
// kernel entries, and the compression cascade restricted to the stages whose
// reasoning survives on each adjacency class. Flat patches reduce exactly to
// the unit-square machinery.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "compression.hpp"
#include "quadrature.hpp"

namespace anisowave {

enum class Adjacency : int { same = 0, shared_edge = 1, shared_vertex = 2, separated = 3 };

// Edges are numbered 0: x=0, 1: x=1, 2: y=0, 3: y=1; corners
// 0: (0,0), 1: (1,0), 2: (0,1), 3: (1,1). For a shared edge, `flip` records
// that the two edge parametrizations run in opposite directions.
struct AdjacencyInfo {
  Adjacency tag = Adjacency::separated;
  int edge_a = -1, edge_b = -1;
  bool flip = false;
  int corner_a = -1, corner_b = -1;
};

using Vec3 = std::array<double, 3>;

inline double dist3(const Vec3& p, const Vec3& q) {
  return std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) +
                   (p[2] - q[2]) * (p[2] - q[2]));
}

// A chart [0,1]^2 -> R^3. Flat patches are axis-aligned planar translates and
// carry only their offset; everything else supplies position and tangents.
struct PatchMap {
  bool flat = true;
  double ox = 0.0, oy = 0.0;
  std::function<Vec3(double, double)> pos;
  std::function<std::array<Vec3, 2>(double, double)> jac;
};

inline Vec3 map_point(const PatchMap& m, double x, double y) {
  if (m.flat) return {m.ox + x, m.oy + y, 0.0};
  return m.pos(x, y);
}

inline double surface_weight(const PatchMap& m, double x, double y) {
  if (m.flat) return 1.0;
  const std::array<Vec3, 2> t = m.jac(x, y);
  const double e = t[0][0] * t[0][0] + t[0][1] * t[0][1] + t[0][2] * t[0][2];
  const double g = t[1][0] * t[1][0] + t[1][1] * t[1][1] + t[1][2] * t[1][2];
  const double f = t[0][0] * t[1][0] + t[0][1] * t[1][1] + t[0][2] * t[1][2];
  return std::sqrt(std::max(0.0, e * g - f * f));
}

inline PatchMap make_flat_patch(double ox, double oy) {
  PatchMap m;
  m.flat = true;
  m.ox = ox;
  m.oy = oy;
  return m;
}

inline PatchMap make_bilinear_patch(const std::array<Vec3, 4>& c) {
  // corner order matches the corner numbering: c[0]=(0,0), c[1]=(1,0),
  // c[2]=(0,1), c[3]=(1,1)
  PatchMap m;
  m.flat = false;
  m.pos = [c](double x, double y) {
    Vec3 p;
    for (int i = 0; i < 3; ++i)
      p[i] = (1 - x) * (1 - y) * c[0][i] + x * (1 - y) * c[1][i] + (1 - x) * y * c[2][i] +
             x * y * c[3][i];
    return p;
  };
  m.jac = [c](double x, double y) {
    std::array<Vec3, 2> t;
    for (int i = 0; i < 3; ++i) {
      t[0][i] = (1 - y) * (c[1][i] - c[0][i]) + y * (c[3][i] - c[2][i]);
      t[1][i] = (1 - x) * (c[2][i] - c[0][i]) + x * (c[3][i] - c[1][i]);
    }
    return t;
  };
  return m;
}

inline PatchMap make_cylinder_patch(double radius, double theta0, double theta1, double height) {
  PatchMap m;
  m.flat = false;
  m.pos = [=](double x, double y) {
    const double th = theta0 + x * (theta1 - theta0);
    return Vec3{radius * std::cos(th), radius * std::sin(th), height * y};
  };
  m.jac = [=](double x, double /*y*/) {
    const double th = theta0 + x * (theta1 - theta0), dth = theta1 - theta0;
    std::array<Vec3, 2> t;
    t[0] = {-radius * dth * std::sin(th), radius * dth * std::cos(th), 0.0};
    t[1] = {0.0, 0.0, height};
    return t;
  };
  return m;
}

struct PatchGeometry {
  std::string name;
  int patches = 0;
  std::vector<PatchMap> maps;
  std::vector<std::vector<AdjacencyInfo>> adj;
  // min 3D distance between non-adjacent patches; +inf when no pair is
  // separated. Geometries are normalized so this is >= 1.
  double separation_floor = std::numeric_limits<double>::infinity();
  // max over patches of max(largest tangent stretch, 1/smallest), sampled on
  // a 64x64 grid; bounds the chart-vs-3D distance distortion
  double lipschitz = 1.0;
};

namespace geo_detail {

inline void singular_values(const PatchMap& m, double x, double y, double& smin, double& smax) {
  if (m.flat) {
    smin = smax = 1.0;
    return;
  }
  const std::array<Vec3, 2> t = m.jac(x, y);
  const double e = t[0][0] * t[0][0] + t[0][1] * t[0][1] + t[0][2] * t[0][2];
  const double g = t[1][0] * t[1][0] + t[1][1] * t[1][1] + t[1][2] * t[1][2];
  const double f = t[0][0] * t[1][0] + t[0][1] * t[1][1] + t[0][2] * t[1][2];
  const double tr = e + g, disc = std::sqrt(std::max(0.0, (e - g) * (e - g) + 4.0 * f * f));
  smax = std::sqrt(0.5 * (tr + disc));
  smin = std::sqrt(std::max(0.0, 0.5 * (tr - disc)));
}

inline std::array<double, 2> edge_point(int edge, double s) {
  switch (edge) {
    case 0: return {0.0, s};
    case 1: return {1.0, s};
    case 2: return {s, 0.0};
    default: return {s, 1.0};
  }
}

inline std::array<double, 2> corner_point(int corner) {
  return {corner == 1 || corner == 3 ? 1.0 : 0.0, corner >= 2 ? 1.0 : 0.0};
}

}  // namespace geo_detail

// Fills the sampled Lipschitz bound and the separation floor. Separate from
// construction so hand-built geometries can call it too.
inline void finalize_geometry(PatchGeometry& g) {
  double lip = 1.0;
  for (const PatchMap& m : g.maps) {
    if (m.flat) continue;
    for (int i = 0; i <= 64; ++i)
      for (int j = 0; j <= 64; ++j) {
        double smin, smax;
        geo_detail::singular_values(m, i / 64.0, j / 64.0, smin, smax);
        lip = std::max(lip, smax);
        if (smin > 0.0) lip = std::max(lip, 1.0 / smin);
      }
  }
  g.lipschitz = lip;

  double floor = std::numeric_limits<double>::infinity();
  const int n = 32;
  for (int pa = 0; pa < g.patches; ++pa)
    for (int pb = pa + 1; pb < g.patches; ++pb) {
      if (g.adj[size_t(pa)][size_t(pb)].tag != Adjacency::separated) continue;
      const PatchMap &ma = g.maps[size_t(pa)], &mb = g.maps[size_t(pb)];
      double best;
      if (ma.flat && mb.flat) {
        const double gx = interval_dist(ma.ox, ma.ox + 1.0, mb.ox, mb.ox + 1.0);
        const double gy = interval_dist(ma.oy, ma.oy + 1.0, mb.oy, mb.oy + 1.0);
        best = std::hypot(gx, gy);
      } else {
        best = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= n; ++i)
          for (int j = 0; j <= n; ++j) {
            const Vec3 p = map_point(ma, i / double(n), j / double(n));
            for (int i2 = 0; i2 <= n; ++i2)
              for (int j2 = 0; j2 <= n; ++j2)
                best = std::min(best, dist3(p, map_point(mb, i2 / double(n), j2 / double(n))));
          }
        // sampled minimum is an upper bound; subtract one chart cell mapped
        // through the Lipschitz constant to get a certified lower bound
        best -= 2.0 * g.lipschitz * std::sqrt(2.0) / double(n);
      }
      floor = std::min(floor, std::max(0.0, best));
    }
  g.separation_floor = floor;
}

// Sampled sanity of a geometry: positive bounded weights, edge and corner
// parametrizations that actually meet, symmetric adjacency, and at least unit
// clearance between separated patches.
inline void validate_geometry(const PatchGeometry& g) {
  if (g.patches < 1 || g.maps.size() != size_t(g.patches) || g.adj.size() != size_t(g.patches))
    throw std::invalid_argument("validate_geometry: inconsistent patch count");
  for (const auto& row : g.adj)
    if (row.size() != size_t(g.patches))
      throw std::invalid_argument("validate_geometry: adjacency table is not square");

  for (int p = 0; p < g.patches; ++p) {
    if (g.adj[size_t(p)][size_t(p)].tag != Adjacency::same)
      throw std::invalid_argument("validate_geometry: diagonal adjacency must be 'same'");
    for (int i = 0; i <= 16; ++i)
      for (int j = 0; j <= 16; ++j) {
        const double w = surface_weight(g.maps[size_t(p)], i / 16.0, j / 16.0);
        if (!(w > 1e-12) || !std::isfinite(w))
          throw std::invalid_argument("validate_geometry: degenerate surface weight");
      }
  }

  for (int pa = 0; pa < g.patches; ++pa)
    for (int pb = 0; pb < g.patches; ++pb) {
      if (pa == pb) continue;
      const AdjacencyInfo& ab = g.adj[size_t(pa)][size_t(pb)];
      const AdjacencyInfo& ba = g.adj[size_t(pb)][size_t(pa)];
      if (ab.tag != ba.tag || ab.flip != ba.flip || ab.edge_a != ba.edge_b ||
          ab.corner_a != ba.corner_b)
        throw std::invalid_argument("validate_geometry: adjacency table is not symmetric");
      if (pa > pb) continue;
      if (ab.tag == Adjacency::shared_edge) {
        for (int i = 0; i <= 8; ++i) {
          const double s = i / 8.0;
          const auto ea = geo_detail::edge_point(ab.edge_a, s);
          const auto eb = geo_detail::edge_point(ab.edge_b, ab.flip ? 1.0 - s : s);
          const Vec3 qa = map_point(g.maps[size_t(pa)], ea[0], ea[1]);
          const Vec3 qb = map_point(g.maps[size_t(pb)], eb[0], eb[1]);
          if (dist3(qa, qb) > 1e-9)
            throw std::invalid_argument("validate_geometry: shared edge does not coincide");
        }
      } else if (ab.tag == Adjacency::shared_vertex) {
        const auto ca = geo_detail::corner_point(ab.corner_a);
        const auto cb = geo_detail::corner_point(ab.corner_b);
        const Vec3 qa = map_point(g.maps[size_t(pa)], ca[0], ca[1]);
        const Vec3 qb = map_point(g.maps[size_t(pb)], cb[0], cb[1]);
        if (dist3(qa, qb) > 1e-9)
          throw std::invalid_argument("validate_geometry: shared vertex does not coincide");
      }
    }

  if (g.separation_floor < 1.0 - 1e-9)
    throw std::invalid_argument(
        "validate_geometry: separated patches closer than the unit floor; rescale the geometry");
}

inline PatchGeometry make_geometry(const std::string& preset) {
  PatchGeometry g;
  g.name = preset;
  auto init_adj = [&](int p) {
    g.patches = p;
    g.adj.assign(size_t(p), std::vector<AdjacencyInfo>(size_t(p)));
    for (int i = 0; i < p; ++i) g.adj[size_t(i)][size_t(i)].tag = Adjacency::same;
  };
  auto set_edge = [&](int a, int b, int ea, int eb, bool flip) {
    g.adj[size_t(a)][size_t(b)] = {Adjacency::shared_edge, ea, eb, flip, -1, -1};
    g.adj[size_t(b)][size_t(a)] = {Adjacency::shared_edge, eb, ea, flip, -1, -1};
  };
  auto set_vertex = [&](int a, int b, int ca, int cb) {
    g.adj[size_t(a)][size_t(b)] = {Adjacency::shared_vertex, -1, -1, false, ca, cb};
    g.adj[size_t(b)][size_t(a)] = {Adjacency::shared_vertex, -1, -1, false, cb, ca};
  };

  if (preset == "unit_square") {
    init_adj(1);
    g.maps = {make_flat_patch(0.0, 0.0)};
  } else if (preset == "two_patch_screen") {
    init_adj(2);
    g.maps = {make_flat_patch(0.0, 0.0), make_flat_patch(1.0, 0.0)};
    set_edge(0, 1, 1, 0, false);
  } else if (preset == "l_corner") {
    // two squares meeting at one corner plus a far square, so every
    // adjacency class appears in a single flat geometry
    init_adj(3);
    g.maps = {make_flat_patch(0.0, 0.0), make_flat_patch(1.0, 1.0), make_flat_patch(3.0, 0.0)};
    set_vertex(0, 1, 3, 0);
  } else if (preset == "cylinder_pair") {
    init_adj(2);
    g.maps = {make_cylinder_patch(1.0, 0.0, M_PI / 2.0, 1.0),
              make_cylinder_patch(1.0, M_PI / 2.0, M_PI, 1.0)};
    set_edge(0, 1, 1, 0, false);
  } else {
    throw std::invalid_argument("make_geometry: unknown preset '" + preset + "'");
  }
  finalize_geometry(g);
  validate_geometry(g);
  return g;
}

// --- glued charts ---------------------------------------------------------

// chart coordinate = shift + sign * (from_y ? patch_y : patch_x)
struct AxisMap {
  double shift = 0.0;
  double sign = 1.0;
  bool from_y = false;
};

struct ChartMap {
  AxisMap cx{0.0, 1.0, false}, cy{0.0, 1.0, true};
};

struct ChartBox {
  double xlo = 0.0, xhi = 0.0, ylo = 0.0, yhi = 0.0;
};

namespace geo_detail {

inline void map_interval(const AxisMap& am, double lo, double hi, double& out_lo,
                         double& out_hi) {
  const double a = am.shift + am.sign * lo, b = am.shift + am.sign * hi;
  out_lo = std::min(a, b);
  out_hi = std::max(a, b);
}

inline ChartBox map_box(const ChartMap& cm, double xlo, double xhi, double ylo, double yhi) {
  ChartBox out;
  geo_detail::map_interval(cm.cx, cm.cx.from_y ? ylo : xlo, cm.cx.from_y ? yhi : xhi, out.xlo,
                           out.xhi);
  geo_detail::map_interval(cm.cy, cm.cy.from_y ? ylo : xlo, cm.cy.from_y ? yhi : xhi, out.ylo,
                           out.yhi);
  return out;
}

// rigid motions of the unit square sending the given edge to {1}x[0,1] with
// the edge parameter landing on the chart y coordinate
inline ChartMap edge_to_right(int edge) {
  ChartMap m;
  switch (edge) {
    case 1: m.cx = {0.0, 1.0, false}; m.cy = {0.0, 1.0, true}; break;
    case 0: m.cx = {1.0, -1.0, false}; m.cy = {0.0, 1.0, true}; break;
    case 2: m.cx = {1.0, -1.0, true}; m.cy = {0.0, 1.0, false}; break;
    default: m.cx = {0.0, 1.0, true}; m.cy = {0.0, 1.0, false}; break;
  }
  return m;
}

inline ChartMap corner_to_11(int corner) {
  ChartMap m;
  m.cx = {corner == 1 || corner == 3 ? 0.0 : 1.0, corner == 1 || corner == 3 ? 1.0 : -1.0,
          false};
  m.cy = {corner >= 2 ? 0.0 : 1.0, corner >= 2 ? 1.0 : -1.0, true};
  return m;
}

inline void reflect_about(AxisMap& am, double c) {
  // post-compose t -> 2c - t
  am.shift = 2.0 * c - am.shift;
  am.sign = -am.sign;
}

}  // namespace geo_detail

struct GluedSupports {
  Adjacency tag = Adjacency::same;
  ChartMap map_a, map_b;
  ChartBox box_a, box_b;
};

// Common chart for an adjacent (or identical) pair: shared edges land on
// {1}x[0,1] inside [0,2]x[0,1], shared vertices on (1,1) inside [0,2]^2, and
// the second patch occupies the x >= 1 half. Separated pairs have no chart.
inline GluedSupports glued_coords(const PatchGeometry& g, const MultiIndex& a,
                                  const MultiIndex& b) {
  const AdjacencyInfo& info = g.adj[size_t(a.patch)][size_t(b.patch)];
  GluedSupports out;
  out.tag = info.tag;
  switch (info.tag) {
    case Adjacency::same:
      break;
    case Adjacency::shared_edge:
      out.map_a = geo_detail::edge_to_right(info.edge_a);
      out.map_b = geo_detail::edge_to_right(info.edge_b);
      if (info.flip) geo_detail::reflect_about(out.map_b.cy, 0.5);
      geo_detail::reflect_about(out.map_b.cx, 1.0);
      break;
    case Adjacency::shared_vertex:
      out.map_a = geo_detail::corner_to_11(info.corner_a);
      out.map_b = geo_detail::corner_to_11(info.corner_b);
      geo_detail::reflect_about(out.map_b.cx, 1.0);
      geo_detail::reflect_about(out.map_b.cy, 1.0);
      break;
    case Adjacency::separated:
      throw std::invalid_argument("glued_coords: separated patches share no chart");
  }
  out.box_a = geo_detail::map_box(out.map_a, support_lo(a.x), support_hi(a.x), support_lo(a.y),
                                  support_hi(a.y));
  out.box_b = geo_detail::map_box(out.map_b, support_lo(b.x), support_hi(b.x), support_lo(b.y),
                                  support_hi(b.y));
  return out;
}

// --- distances ------------------------------------------------------------

struct SurfaceDistances {
  Adjacency tag = Adjacency::same;
  double delta = 0.0;
  double dx = 0.0, dy = 0.0;
  double sx = 0.0, sy = 0.0;
  // false for separated pairs, whose geometry supports no directional or
  // singular-support reasoning
  bool sigma_valid = true;
  // per-direction levels as seen in the common chart (axis swaps applied)
  LevelPair ja_chart{0, 0}, jb_chart{0, 0};
};

namespace geo_detail {

struct ChartAxisData {
  int level = 0;
  double lo = 0.0, hi = 0.0;
  double kinks[3];
  int nkinks = 0;
};

inline ChartAxisData chart_axis(const MultiIndex& m, const AxisMap& am) {
  const Member1D& src = am.from_y ? m.y : m.x;
  ChartAxisData d;
  d.level = src.j;
  map_interval(am, support_lo(src), support_hi(src), d.lo, d.hi);
  double pts[3];
  d.nkinks = member_kinks(src, pts);
  for (int i = 0; i < d.nkinks; ++i) d.kinks[i] = am.shift + am.sign * pts[i];
  return d;
}

inline double sigma_chart(const ChartAxisData& a, const ChartAxisData& b) {
  auto one_way = [](const ChartAxisData& fine, const ChartAxisData& coarse) {
    double d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < coarse.nkinks; ++i) {
      const double p = coarse.kinks[i];
      if (p < fine.lo)
        d = std::min(d, fine.lo - p);
      else if (p > fine.hi)
        d = std::min(d, p - fine.hi);
      else
        return 0.0;
    }
    return d;
  };
  if (a.level > b.level) return one_way(a, b);
  if (b.level > a.level) return one_way(b, a);
  return std::min(one_way(a, b), one_way(b, a));
}

// min distance between the 3D images of two support boxes: exact for flat
// translates, otherwise sampled on (n+1)^2 grids with the mapped half-cell
// diagonals subtracted to certify a lower bound
inline double sampled_box_distance(const PatchMap& ma, const ChartBox& ba, const PatchMap& mb,
                                   const ChartBox& bb, double lipschitz, int n) {
  if (ma.flat && mb.flat) {
    const double gx = interval_dist(ma.ox + ba.xlo, ma.ox + ba.xhi, mb.ox + bb.xlo,
                                    mb.ox + bb.xhi);
    const double gy = interval_dist(ma.oy + ba.ylo, ma.oy + ba.yhi, mb.oy + bb.ylo,
                                    mb.oy + bb.yhi);
    return std::hypot(gx, gy);
  }
  double best = std::numeric_limits<double>::infinity();
  std::vector<Vec3> pa;
  pa.reserve(size_t((n + 1) * (n + 1)));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      pa.push_back(map_point(ma, ba.xlo + (ba.xhi - ba.xlo) * i / double(n),
                             ba.ylo + (ba.yhi - ba.ylo) * j / double(n)));
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const Vec3 q = map_point(mb, bb.xlo + (bb.xhi - bb.xlo) * i / double(n),
                               bb.ylo + (bb.yhi - bb.ylo) * j / double(n));
      for (const Vec3& p : pa) best = std::min(best, dist3(p, q));
    }
  const double half_diag_a =
      0.5 * std::hypot((ba.xhi - ba.xlo) / double(n), (ba.yhi - ba.ylo) / double(n));
  const double half_diag_b =
      0.5 * std::hypot((bb.xhi - bb.xlo) / double(n), (bb.yhi - bb.ylo) / double(n));
  return best - lipschitz * (half_diag_a + half_diag_b);
}

}  // namespace geo_detail

inline SurfaceDistances surface_distances(const PatchGeometry& g, const MultiIndex& a,
                                          const MultiIndex& b) {
  const AdjacencyInfo& info = g.adj[size_t(a.patch)][size_t(b.patch)];
  SurfaceDistances out;
  out.tag = info.tag;
  out.ja_chart = {a.x.j, a.y.j};
  out.jb_chart = {b.x.j, b.y.j};
  if (info.tag == Adjacency::same) {
    out.dx = delta_x(a, b);
    out.dy = delta_y(a, b);
    out.delta = std::hypot(out.dx, out.dy);
    out.sx = sigma_x(a, b);
    out.sy = sigma_y(a, b);
    return out;
  }
  if (info.tag == Adjacency::separated) {
    const ChartBox box_a{support_lo(a.x), support_hi(a.x), support_lo(a.y), support_hi(a.y)};
    const ChartBox box_b{support_lo(b.x), support_hi(b.x), support_lo(b.y), support_hi(b.y)};
    const double lower = geo_detail::sampled_box_distance(
        g.maps[size_t(a.patch)], box_a, g.maps[size_t(b.patch)], box_b, g.lipschitz, 4);
    out.delta = std::max(lower, g.separation_floor);
    out.sigma_valid = false;
    return out;
  }
  const GluedSupports gs = glued_coords(g, a, b);
  const geo_detail::ChartAxisData ax = geo_detail::chart_axis(a, gs.map_a.cx);
  const geo_detail::ChartAxisData ay = geo_detail::chart_axis(a, gs.map_a.cy);
  const geo_detail::ChartAxisData bx = geo_detail::chart_axis(b, gs.map_b.cx);
  const geo_detail::ChartAxisData by = geo_detail::chart_axis(b, gs.map_b.cy);
  out.dx = interval_dist(ax.lo, ax.hi, bx.lo, bx.hi);
  out.dy = interval_dist(ay.lo, ay.hi, by.lo, by.hi);
  out.delta = std::hypot(out.dx, out.dy);
  out.sx = geo_detail::sigma_chart(ax, bx);
  out.sy = geo_detail::sigma_chart(ay, by);
  out.ja_chart = {ax.level, ay.level};
  out.jb_chart = {bx.level, by.level};
  return out;
}

// --- compression on the surface --------------------------------------------

// Same patch: the full unit-square cascade. Edge-adjacent: the full cascade in
// glued coordinates, where touching singular supports disable the second
// compression on their own (sigma = 0 never clears a cutoff). Vertex-adjacent:
// level gate, support-distance stage, and the second compression only in the
// direction farther from the shared corner. Separated: level gate and the
// support-distance stage with the certified 3D distance.
inline KeepDecision keep_entry_surface(const PatchGeometry& g, const MultiIndex& a,
                                       const MultiIndex& b, const CompressionParams& p) {
  const AdjacencyInfo& info = g.adj[size_t(a.patch)][size_t(b.patch)];
  if (info.tag == Adjacency::same) return keep_entry(a, b, p);

  if (info.tag == Adjacency::separated) {
    validate(p);
    const RateParams rp = rate_params(p);
    const double radius = rp.nu > 0.0 ? p.alpha * p.r * rp.s_bar / rp.nu : 0.0;
    const LevelPair ja{a.x.j, a.y.j}, jb{b.x.j, b.y.j};
    const int dinf = std::max(std::abs(ja[0] - jb[0]), std::abs(ja[1] - jb[1]));
    if (double(dinf) > radius) return {false, Stage::diagonal};
    const SurfaceDistances sd = surface_distances(g, a, b);
    if (sd.delta >= cutoff_B(ja, jb, p)) return {false, Stage::first};
    return {true, Stage::kept};
  }

  const SurfaceDistances sd = surface_distances(g, a, b);
  PairData d;
  d.ja = sd.ja_chart;
  d.jb = sd.jb_chart;
  d.dx = sd.dx;
  d.dy = sd.dy;
  d.sx = sd.sx;
  d.sy = sd.sy;
  StageMask mask;
  if (info.tag == Adjacency::shared_vertex) {
    mask.mixed_43 = false;
    mask.mixed_53 = false;
    if (sd.sx >= sd.sy)
      mask.second_y = false;
    else
      mask.second_x = false;
  }
  return keep_entry_core(d, p, mask);
}

// --- entries ----------------------------------------------------------------

// Entries of the pulled-back kernel. Flat patch pairs ride the planar engine
// (same-patch pairs verbatim, cross-patch pairs through a support shift);
// curved pairs integrate kappa(|tau(u) - tau'(v)|) w w' psi psi' by adaptive
// cell-pair refinement toward the contact set.
class SurfaceEngine {
 public:
  SurfaceEngine(const PatchGeometry& g, const WaveletFamily& fam, const Kernel& kernel, double q,
                QuadratureSpec spec = {})
      : geom_(g), fam_(fam), kernel_(kernel), q_(q), spec_(spec), flat_(fam, kernel, q, spec) {}

  const PatchGeometry& geometry() const { return geom_; }

  double entry(const MultiIndex& a, const MultiIndex& b) const {
    const PatchMap& ma = geom_.maps[size_t(a.patch)];
    const PatchMap& mb = geom_.maps[size_t(b.patch)];
    if (ma.flat && mb.flat) {
      if (a.patch == b.patch) return flat_.entry(a, b);
      return flat_.entry_shifted(a, b, mb.ox - ma.ox, mb.oy - ma.oy).value;
    }
    return curved_entry(a, b);
  }

 private:
  struct Cell {
    double x0, x1, y0, y1;
  };

  static std::vector<Cell> member_cells(const MultiIndex& m) {
    double kx[3], ky[3];
    const int nx = member_kinks(m.x, kx), ny = member_kinks(m.y, ky);
    std::vector<Cell> cells;
    for (int i = 0; i + 1 < nx; ++i)
      for (int j = 0; j + 1 < ny; ++j) cells.push_back({kx[i], kx[i + 1], ky[j], ky[j + 1]});
    return cells;
  }

  // Staggered orders (n for the first box, n+1 for the second) keep the node
  // grids disjoint, so a singular kernel is never sampled at zero distance
  // even on coinciding cells.
  double gauss_cell_pair(const PatchMap& pa, const PatchMap& pb, const Cell& ca, const Cell& cb,
                         const MultiIndex& a, const MultiIndex& b, int order) const {
    const GaussRule& ra = gauss_rule(order);
    const GaussRule& rb = gauss_rule(order + 1);
    const int na = order, nb = order + 1;
    std::vector<Vec3> qa(size_t(na) * size_t(na));
    std::vector<double> fa(size_t(na) * size_t(na));
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < na; ++j) {
        const double x = ca.x0 + (ca.x1 - ca.x0) * ra.x[size_t(i)];
        const double y = ca.y0 + (ca.y1 - ca.y0) * ra.x[size_t(j)];
        qa[size_t(i * na + j)] = map_point(pa, x, y);
        fa[size_t(i * na + j)] = surface_weight(pa, x, y) * evaluate(fam_, a.x, x) *
                                 evaluate(fam_, a.y, y) * ra.w[size_t(i)] * ra.w[size_t(j)];
      }
    double acc = 0.0;
    for (int i = 0; i < nb; ++i)
      for (int j = 0; j < nb; ++j) {
        const double x = cb.x0 + (cb.x1 - cb.x0) * rb.x[size_t(i)];
        const double y = cb.y0 + (cb.y1 - cb.y0) * rb.x[size_t(j)];
        const Vec3 qb = map_point(pb, x, y);
        const double fb = surface_weight(pb, x, y) * evaluate(fam_, b.x, x) *
                          evaluate(fam_, b.y, y) * rb.w[size_t(i)] * rb.w[size_t(j)];
        double inner = 0.0;
        for (size_t t = 0; t < qa.size(); ++t) inner += fa[t] * radial(kernel_, dist3(qa[t], qb));
        acc += inner * fb;
      }
    return acc * (ca.x1 - ca.x0) * (ca.y1 - ca.y0) * (cb.x1 - cb.x0) * (cb.y1 - cb.y0);
  }

  double cell_pair(const PatchMap& pa, const PatchMap& pb, const Cell& ca, const Cell& cb,
                   const MultiIndex& a, const MultiIndex& b, bool same_patch, int depth) const {
    const double diag_a = geom_.lipschitz * std::hypot(ca.x1 - ca.x0, ca.y1 - ca.y0);
    const double diag_b = geom_.lipschitz * std::hypot(cb.x1 - cb.x0, cb.y1 - cb.y0);
    // corner samples give the separation up to half a diagonal per box
    double dmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const Vec3 p = map_point(pa, i ? ca.x1 : ca.x0, j ? ca.y1 : ca.y0);
        for (int i2 = 0; i2 < 2; ++i2)
          for (int j2 = 0; j2 < 2; ++j2)
            dmin = std::min(
                dmin, dist3(p, map_point(pb, i2 ? cb.x1 : cb.x0, j2 ? cb.y1 : cb.y0)));
      }
    const double sep = dmin - 0.5 * (diag_a + diag_b);
    // overlapping same-patch boxes surround the 2D diagonal singularity,
    // where cell pairs would multiply like 4^depth; cap that branch early and
    // accept the coarser leaves (curved self-interactions are diagnostic, not
    // assembly-grade)
    const bool overlap = same_patch &&
                         std::min(ca.x1, cb.x1) - std::max(ca.x0, cb.x0) > 1e-14 &&
                         std::min(ca.y1, cb.y1) - std::max(ca.y0, cb.y0) > 1e-14;
    const int cap = overlap ? std::min(spec_.max_subdivision_depth, 6)
                            : spec_.max_subdivision_depth;
    if (sep >= std::max(diag_a, diag_b) || depth >= cap)
      return gauss_cell_pair(pa, pb, ca, cb, a, b, std::min(spec_.gauss_order, 6));
    // split the larger cell and recurse toward the contact set
    double acc = 0.0;
    if (diag_a >= diag_b) {
      const double xm = 0.5 * (ca.x0 + ca.x1), ym = 0.5 * (ca.y0 + ca.y1);
      const Cell kids[4] = {{ca.x0, xm, ca.y0, ym},
                            {xm, ca.x1, ca.y0, ym},
                            {ca.x0, xm, ym, ca.y1},
                            {xm, ca.x1, ym, ca.y1}};
      for (const Cell& k : kids) acc += cell_pair(pa, pb, k, cb, a, b, same_patch, depth + 1);
    } else {
      const double xm = 0.5 * (cb.x0 + cb.x1), ym = 0.5 * (cb.y0 + cb.y1);
      const Cell kids[4] = {{cb.x0, xm, cb.y0, ym},
                            {xm, cb.x1, cb.y0, ym},
                            {cb.x0, xm, ym, cb.y1},
                            {xm, cb.x1, ym, cb.y1}};
      for (const Cell& k : kids) acc += cell_pair(pa, pb, ca, k, a, b, same_patch, depth + 1);
    }
    return acc;
  }

  double curved_entry(const MultiIndex& a, const MultiIndex& b) const {
    check_member(fam_, a.x);
    check_member(fam_, a.y);
    check_member(fam_, b.x);
    check_member(fam_, b.y);
    const PatchMap& pa = geom_.maps[size_t(a.patch)];
    const PatchMap& pb = geom_.maps[size_t(b.patch)];
    const bool same_patch = a.patch == b.patch;
    double acc = 0.0;
    for (const Cell& ca : member_cells(a))
      for (const Cell& cb : member_cells(b))
        acc += cell_pair(pa, pb, ca, cb, a, b, same_patch, 0);
    return acc * std::exp2(-q_ * (level_linf(a) + level_linf(b)));
  }

  PatchGeometry geom_;
  WaveletFamily fam_;
  Kernel kernel_;
  double q_;
  QuadratureSpec spec_;
  EntryEngine flat_;
};

// one-off convenience; builds a full engine per call, so batch work should
// hold a SurfaceEngine instead
inline double surface_entry(const PatchGeometry& g, const WaveletFamily& fam,
                            const Kernel& kernel, const MultiIndex& a, const MultiIndex& b,
                            double q, const QuadratureSpec& spec = {}) {
  return SurfaceEngine(g, fam, kernel, q, spec).entry(a, b);
}

}  // namespace anisowave

#endif
