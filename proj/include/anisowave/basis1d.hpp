#ifndef ANISOWAVE_BASIS1D_HPP
#define ANISOWAVE_BASIS1D_HPP

// Orthonormal piecewise-polynomial multiwavelets on [0,1] (Alpert-type).
// Order d gives d scaling functions (Legendre on [0,1], coarsest level only)
// and d mother wavelets with pieces on [0,1/2],[1/2,1] and d vanishing
// moments, built by Gram-Schmidt on monomials over the split interval.
// Level-j wavelets 2^{j/2} psi_t(2^j x - k) live on [k 2^-j, (k+1) 2^-j];
// the family is orthonormal across all levels, so both Riesz constants are 1.

#include <string>

#include "poly.hpp"

namespace anisowave {

enum class Kind1D : int { scaling = 0, wavelet = 1 };

struct Member1D {
  Kind1D kind = Kind1D::wavelet;
  int j = 0;  // level; scaling members only at the coarsest level 0
  int k = 0;  // translation, 0 <= k < 2^j
  int t = 0;  // type within the multiwavelet, 0 <= t < order
  friend bool operator==(const Member1D&, const Member1D&) = default;
};

struct WaveletFamily {
  int order = 1;              // polynomial order d (degree < d)
  int vanishing_moments = 1;  // dtilde, equals order for this construction
  double gamma = 0.5;         // sup of Sobolev smoothness of the basis
  int mother_count = 1;
  int max_level = 0;
  std::vector<PiecewisePoly> scaling;  // d functions, one piece on [0,1]
  std::vector<PiecewisePoly> mother;   // d functions, pieces [0,1/2],[1/2,1]
};

namespace detail {

inline void orthonormalize(std::vector<PiecewisePoly>& f) {
  // modified Gram-Schmidt, two passes for orthogonality near machine precision
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j < i; ++j) f[i].add_scaled(f[j], -pp_inner(f[i], f[j]));
    const double n = pp_norm(f[i]);
    if (n < 1e-13) throw std::runtime_error("orthonormalize: dependent candidate set");
    f[i].scale(1.0 / n);
  }
}

// deterministic sign convention: first nonzero of (value at 0, then higher
// local coefficients of the first piece) is positive
inline void fix_sign(PiecewisePoly& f) {
  for (const double c : f.pieces.front().c) {
    if (std::fabs(c) > 1e-9) {
      if (c < 0.0) f.scale(-1.0);
      return;
    }
  }
}

}  // namespace detail

inline WaveletFamily build_family(int order, int max_level) {
  if (order < 1 || order > 6) throw std::invalid_argument("build_family: order must be in [1,6]");
  if (max_level < 0 || max_level > 30)
    throw std::invalid_argument("build_family: max_level must be in [0,30]");
  WaveletFamily fam;
  fam.order = order;
  fam.vanishing_moments = order;
  fam.mother_count = order;
  fam.max_level = max_level;
  fam.gamma = 0.5;  // discontinuous at piece breakpoints

  // scaling functions: orthonormalized monomials on [0,1]
  std::vector<PiecewisePoly> sc;
  for (int m = 0; m < order; ++m) {
    PiecewisePoly f;
    Coeffs c(m + 1, 0.0);
    c[m] = 1.0;
    f.pieces.push_back({0.0, 1.0, c});
    sc.push_back(f);
  }
  detail::orthonormalize(sc);
  for (auto& f : sc) detail::fix_sign(f);
  fam.scaling = sc;

  // mothers: Gram-Schmidt monomials over the split [0,1/2] u [1/2,1]; the
  // trailing block is orthogonal to all degree < order polynomials, which is
  // exactly the vanishing-moment property
  auto two_piece_monomial = [&](int m, bool right_half_only) {
    PiecewisePoly f;
    // x^m = (t/2)^m on [0,1/2] and ((1+t)/2)^m on [1/2,1] in local coordinates
    Coeffs base(m + 1, 0.0);
    base[m] = 1.0;
    Coeffs left = poly_affine(base, 0.0, 0.5);
    Coeffs right = poly_affine(base, 0.5, 0.5);
    if (right_half_only) left.assign(1, 0.0);
    f.pieces.push_back({0.0, 0.5, left});
    f.pieces.push_back({0.5, 1.0, right});
    return f;
  };
  std::vector<PiecewisePoly> cand;
  for (int m = 0; m < order; ++m) cand.push_back(two_piece_monomial(m, false));
  for (int m = 0; m < order; ++m) cand.push_back(two_piece_monomial(m, true));
  detail::orthonormalize(cand);
  for (int m = 0; m < order; ++m) {
    PiecewisePoly psi = cand[order + m];
    detail::fix_sign(psi);
    fam.mother.push_back(psi);
  }
  return fam;
}

inline double support_lo(const Member1D& m) { return std::ldexp(double(m.k), -m.j); }
inline double support_hi(const Member1D& m) { return std::ldexp(double(m.k + 1), -m.j); }

inline void check_member(const WaveletFamily& fam, const Member1D& m) {
  if (m.kind == Kind1D::scaling && m.j != 0)
    throw std::invalid_argument("member: scaling functions live at level 0 only");
  if (m.j < 0 || m.j > fam.max_level) throw std::invalid_argument("member: level out of range");
  if (m.k < 0 || m.k >= (1 << m.j)) throw std::invalid_argument("member: translation out of range");
  if (m.t < 0 || m.t >= fam.order) throw std::invalid_argument("member: type out of range");
}

// materialized 2^{j/2} psi_t(2^j x - k); exact in floating point (dyadic maps)
inline PiecewisePoly realize(const WaveletFamily& fam, const Member1D& m) {
  check_member(fam, m);
  const PiecewisePoly& base = m.kind == Kind1D::scaling ? fam.scaling[m.t] : fam.mother[m.t];
  const double h = std::ldexp(1.0, -m.j);
  const double amp = std::exp2(0.5 * m.j);
  PiecewisePoly out;
  for (const Piece& p : base.pieces) {
    Piece q;
    q.lo = (p.lo + m.k) * h;
    q.hi = (p.hi + m.k) * h;
    q.c = p.c;
    for (double& ck : q.c) ck *= amp;
    out.pieces.push_back(q);
  }
  return out;
}

inline double evaluate(const WaveletFamily& fam, const Member1D& m, double x) {
  check_member(fam, m);
  const double w = std::ldexp(x, m.j) - m.k;  // 2^j x - k
  if (w < 0.0 || w > 1.0) return 0.0;
  const PiecewisePoly& base = m.kind == Kind1D::scaling ? fam.scaling[m.t] : fam.mother[m.t];
  return std::exp2(0.5 * m.j) * base.value(w);
}

inline double moment(const WaveletFamily& fam, const Member1D& m, int mm) {
  if (mm < 0) throw std::invalid_argument("moment: order must be >= 0");
  return pp_moment(realize(fam, m), mm);
}

inline std::vector<double> singular_support(const WaveletFamily& fam, const Member1D& m) {
  check_member(fam, m);
  const PiecewisePoly& base = m.kind == Kind1D::scaling ? fam.scaling[m.t] : fam.mother[m.t];
  std::vector<double> pts;
  const double h = std::ldexp(1.0, -m.j);
  for (double b : base.breakpoints()) pts.push_back((b + m.k) * h);
  return pts;
}

// members per direction when levels 0..J are active
inline long count_1d(int order, int J) { return long(order) * (1L << (J + 1)); }

}  // namespace anisowave

#endif
