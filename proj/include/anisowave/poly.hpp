#ifndef ANISOWAVE_POLY_HPP
#define ANISOWAVE_POLY_HPP

// Piecewise polynomials stored in per-piece local coordinates t = (x-lo)/(hi-lo).
// Local coordinates keep coefficients O(value) even for pieces of width 2^-30,
// which is what makes 1e-12 orthonormality checks at deep levels possible.
// All integrals here are exact coefficient manipulations, no quadrature.

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace anisowave {

using Coeffs = std::vector<double>;

inline double poly_eval(const Coeffs& c, double t) {
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v = v * t + c[k];
  return v;
}

inline Coeffs poly_mul(const Coeffs& a, const Coeffs& b) {
  if (a.empty() || b.empty()) return {};
  Coeffs r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

// q(s) = p(t0 + h*s)
inline Coeffs poly_affine(const Coeffs& c, double t0, double h) {
  Coeffs r{0.0};
  Coeffs pw{1.0};  // (t0 + h s)^k, built incrementally
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (r.size() < pw.size()) r.resize(pw.size(), 0.0);
    for (std::size_t i = 0; i < pw.size(); ++i) r[i] += c[k] * pw[i];
    if (k + 1 < c.size()) {
      Coeffs nxt(pw.size() + 1, 0.0);
      for (std::size_t i = 0; i < pw.size(); ++i) {
        nxt[i] += t0 * pw[i];
        nxt[i + 1] += h * pw[i];
      }
      pw = std::move(nxt);
    }
  }
  return r;
}

inline double poly_int01(const Coeffs& c) {
  double v = 0.0;
  for (std::size_t k = c.size(); k-- > 0;) v += c[k] / double(k + 1);
  return v;
}

struct Piece {
  double lo = 0.0, hi = 1.0;
  Coeffs c;  // value(x) = sum c[k] ((x-lo)/(hi-lo))^k
  double width() const { return hi - lo; }
  double value_local(double t) const { return poly_eval(c, t); }
  double value(double x) const { return poly_eval(c, (x - lo) / (hi - lo)); }
};

// Sorted, non-overlapping pieces; value is 0 outside, right-continuous at
// breakpoints, and closed at the right end of the overall support.
struct PiecewisePoly {
  std::vector<Piece> pieces;

  bool empty() const { return pieces.empty(); }
  double lo() const { return pieces.front().lo; }
  double hi() const { return pieces.back().hi; }

  double value(double x) const {
    if (pieces.empty()) return 0.0;
    if (x < lo() || x > hi()) return 0.0;
    if (x == hi()) return pieces.back().value_local(1.0);
    for (const Piece& p : pieces)
      if (x >= p.lo && x < p.hi) return p.value(x);
    return 0.0;
  }

  std::vector<double> breakpoints() const {
    std::vector<double> b;
    for (const Piece& p : pieces) b.push_back(p.lo);
    if (!pieces.empty()) b.push_back(pieces.back().hi);
    return b;
  }

  // Requires identical piece layout; used by Gram-Schmidt.
  void add_scaled(const PiecewisePoly& o, double a) {
    assert(pieces.size() == o.pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      Coeffs& c = pieces[i].c;
      const Coeffs& d = o.pieces[i].c;
      if (c.size() < d.size()) c.resize(d.size(), 0.0);
      for (std::size_t k = 0; k < d.size(); ++k) c[k] += a * d[k];
    }
  }
  void scale(double a) {
    for (Piece& p : pieces)
      for (double& ck : p.c) ck *= a;
  }
};

// exact integral of x^m * P(x) over the piece
inline double piece_moment(const Piece& p, int m) {
  Coeffs xm{1.0};                    // (lo + w t)^m
  const Coeffs lin{p.lo, p.width()};
  for (int i = 0; i < m; ++i) xm = poly_mul(xm, lin);
  return p.width() * poly_int01(poly_mul(xm, p.c));
}

inline double pp_moment(const PiecewisePoly& f, int m) {
  double v = 0.0;
  for (const Piece& p : f.pieces) v += piece_moment(p, m);
  return v;
}

// exact integral of f(x) * g(x - s) dx
inline double pp_inner_shifted(const PiecewisePoly& f, const PiecewisePoly& g, double s) {
  double v = 0.0;
  for (const Piece& pf : f.pieces) {
    for (const Piece& pg : g.pieces) {
      const double c = std::max(pf.lo, pg.lo + s);
      const double d = std::min(pf.hi, pg.hi + s);
      if (d <= c) continue;
      const Coeffs a = poly_affine(pf.c, (c - pf.lo) / pf.width(), (d - c) / pf.width());
      const Coeffs b = poly_affine(pg.c, (c - s - pg.lo) / pg.width(), (d - c) / pg.width());
      v += (d - c) * poly_int01(poly_mul(a, b));
    }
  }
  return v;
}

inline double pp_inner(const PiecewisePoly& f, const PiecewisePoly& g) {
  return pp_inner_shifted(f, g, 0.0);
}

inline double pp_norm(const PiecewisePoly& f) { return std::sqrt(pp_inner(f, f)); }

// Dense solve with partial pivoting; only used for tiny systems (poly fits).
inline std::vector<double> solve_dense(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = A.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(A[i][k]) > std::fabs(A[piv][k])) piv = i;
    std::swap(A[k], A[piv]);
    std::swap(b[k], b[piv]);
    if (A[k][k] == 0.0) throw std::runtime_error("solve_dense: singular system");
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = A[i][k] / A[k][k];
      for (std::size_t j = k; j < n; ++j) A[i][j] -= f * A[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double v = b[i];
    for (std::size_t j = i + 1; j < n; ++j) v -= A[i][j] * x[j];
    x[i] = v / A[i][i];
  }
  return x;
}

struct GaussRule {
  std::vector<double> x, w;  // on [0,1]
};

// Gauss-Legendre by Newton iteration on the Legendre recurrence.
inline const GaussRule& gauss_rule(int n) {
  static std::map<int, GaussRule> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1 || n > 64) throw std::invalid_argument("gauss_rule: order out of range");
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));  // Chebyshev initial guess
    double dp = 0.0;
    for (int it2 = 0; it2 < 100; ++it2) {
      double p0 = 1.0, p1 = x;
      if (n == 1) p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double pn = (n == 1) ? x : p1;
      const double pm = (n == 1) ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    r.x[i] = 0.5 * (1.0 - x);  // map [-1,1] -> [0,1], reversed order is fine
    r.w[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  auto [pos, ok] = cache.emplace(n, std::move(r));
  return pos->second;
}

}  // namespace anisowave

#endif
