#ifndef ANISOWAVE_ASSEMBLY_HPP
#define ANISOWAVE_ASSEMBLY_HPP

// Finite sections of the operator: enumerate every tensor index with both
// directional levels at most J, assemble the dense matrix or its compressed
// counterpart, and apply the dropped complement matrix-free. Entries are
// computed once per unordered pair (the kernels are symmetric in their
// arguments) and mirrored, which halves quadrature cost; pass
// exploit_symmetry = false to measure the engine's swap symmetry instead.

#include <algorithm>
#include <array>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "compression.hpp"
#include "quadrature.hpp"

namespace anisowave {

struct BasisWindow {
  WaveletFamily family;  // owned copy; windows outlive transient family objects
  int J = 0;
  std::vector<MultiIndex> indices;
  long size() const { return long(indices.size()); }
};

// Deterministic enumeration, lexicographic in
// (patch, j_x, j_y, kind_x, t_x, kind_y, t_y, k_x, k_y); scaling members sort
// before wavelets on their shared level 0. Refuses windows beyond 10^6
// indices, where the quadratic pair loops stop being a sane plan.
inline BasisWindow build_window(const WaveletFamily& fam, int J) {
  if (J < 0) throw std::invalid_argument("build_window: J must be nonnegative");
  if (J > fam.max_level)
    throw std::invalid_argument("build_window: J exceeds the family's realized max level");
  const long per_dir = count_1d(fam.order, J);
  if (per_dir * per_dir > 1000000L)
    throw std::invalid_argument("build_window: N = " + std::to_string(per_dir * per_dir) +
                                " exceeds the 10^6 index limit; use a smaller J");
  // (kind, type) slots per level; the k loop runs innermost
  auto slots = [&](int j) {
    std::vector<std::pair<Kind1D, int>> s;
    if (j == 0)
      for (int t = 0; t < fam.order; ++t) s.emplace_back(Kind1D::scaling, t);
    for (int t = 0; t < fam.order; ++t) s.emplace_back(Kind1D::wavelet, t);
    return s;
  };

  BasisWindow w;
  w.family = fam;
  w.J = J;
  w.indices.reserve(size_t(per_dir) * size_t(per_dir));
  for (int jx = 0; jx <= J; ++jx)
    for (int jy = 0; jy <= J; ++jy)
      for (const auto& [kx_kind, tx] : slots(jx))
        for (const auto& [ky_kind, ty] : slots(jy))
          for (int kx = 0; kx < (1 << jx); ++kx)
            for (int ky = 0; ky < (1 << jy); ++ky) {
              MultiIndex a;
              a.x = {kx_kind, jx, kx, tx};
              a.y = {ky_kind, jy, ky, ty};
              w.indices.push_back(a);
            }
  return w;
}

struct DenseMatrix {
  long n = 0;
  std::vector<double> a;  // row-major
  double& at(long i, long j) { return a[size_t(i) * size_t(n) + size_t(j)]; }
  double at(long i, long j) const { return a[size_t(i) * size_t(n) + size_t(j)]; }
};

inline DenseMatrix assemble_full(const BasisWindow& w, const Kernel& kernel, double q,
                                 const QuadratureSpec& spec, bool exploit_symmetry = true) {
  const long n = w.size();
  if (n > 20000)
    throw std::invalid_argument(
        "assemble_full: N = " + std::to_string(n) +
        " exceeds the dense limit of 2*10^4; use dropped_apply or the compressed path");
  EntryEngine eng(w.family, kernel, q, spec);
  DenseMatrix m;
  m.n = n;
  m.a.assign(size_t(n) * size_t(n), 0.0);
  for (long i = 0; i < n; ++i) {
    m.at(i, i) = eng.entry(w.indices[i], w.indices[i]);
    for (long j = i + 1; j < n; ++j) {
      const double v = eng.entry(w.indices[i], w.indices[j]);
      m.at(i, j) = v;
      m.at(j, i) = exploit_symmetry ? v : eng.entry(w.indices[j], w.indices[i]);
    }
  }
  return m;
}

struct CompressedOperator {
  int r = 0;
  CompressionParams params;
  long n = 0;
  std::vector<long> row_ptr;  // size n + 1
  std::vector<long> col;      // kept columns per row, ascending
  std::vector<double> val;    // entry values aligned with col
  std::array<long, 9> stage_histogram{};  // counts over all pairs, Stage order
  long warn_count = 0;    // kept entries whose quadrature flagged itself
  double worst_err = 0.0; // largest error estimate among kept entries
  long nnz() const { return long(col.size()); }
};

inline CompressedOperator assemble_compressed(const BasisWindow& w, const Kernel& kernel,
                                              const CompressionParams& p,
                                              const QuadratureSpec& spec,
                                              bool exploit_symmetry = true) {
  validate(p);
  const long n = w.size();
  EntryEngine eng(w.family, kernel, p.q, spec);
  CompressedOperator op;
  op.r = p.r;
  op.params = p;
  op.n = n;
  op.row_ptr.assign(size_t(n) + 1, 0);

  // pattern first: cheap decisions, symmetric by construction
  std::vector<std::vector<long>> cols(w.indices.size());
  for (long i = 0; i < n; ++i)
    for (long j = i; j < n; ++j) {
      const KeepDecision dec = keep_entry(w.indices[i], w.indices[j], p);
      const long pairs = i == j ? 1 : 2;
      op.stage_histogram[size_t(dec.stage)] += pairs;
      if (!dec.kept) continue;
      cols[size_t(i)].push_back(j);
      if (i != j) cols[size_t(j)].push_back(i);
    }

  for (long i = 0; i < n; ++i) {
    std::sort(cols[size_t(i)].begin(), cols[size_t(i)].end());
    op.row_ptr[size_t(i) + 1] = op.row_ptr[size_t(i)] + long(cols[size_t(i)].size());
  }
  op.col.reserve(size_t(op.row_ptr[size_t(n)]));
  for (long i = 0; i < n; ++i)
    op.col.insert(op.col.end(), cols[size_t(i)].begin(), cols[size_t(i)].end());
  op.val.assign(op.col.size(), 0.0);

  // values on the canonical half, mirrored through the symmetric pattern
  auto slot = [&](long i, long j) {
    const long lo = op.row_ptr[size_t(i)], hi = op.row_ptr[size_t(i) + 1];
    const auto it = std::lower_bound(op.col.begin() + lo, op.col.begin() + hi, j);
    return long(it - op.col.begin());
  };
  for (long i = 0; i < n; ++i) {
    const long lo = op.row_ptr[size_t(i)], hi = op.row_ptr[size_t(i) + 1];
    for (long s = lo; s < hi; ++s) {
      const long j = op.col[size_t(s)];
      if (j < i) continue;
      const EntryResult e = eng.entry_full(w.indices[i], w.indices[j]);
      if (!e.converged) {
        ++op.warn_count;
        op.worst_err = std::max(op.worst_err, e.err_estimate);
      }
      op.val[size_t(s)] = e.value;
      if (j != i) {
        const EntryResult back =
            exploit_symmetry ? e : eng.entry_full(w.indices[j], w.indices[i]);
        op.val[size_t(slot(j, i))] = back.value;
        if (!exploit_symmetry && !back.converged) ++op.warn_count;
      }
    }
  }
  return op;
}

// Pattern-only pass for complexity measurements: no quadrature, just the
// cascade over the canonical half of the pair set.
struct PatternSummary {
  long nnz = 0;
  long max_row = 0;
  std::array<long, 9> stage_histogram{};
};

inline PatternSummary pattern_summary(const BasisWindow& w, const CompressionParams& p) {
  validate(p);
  const long n = w.size();
  std::vector<long> row_nnz(size_t(n), 0);
  PatternSummary s;
  for (long i = 0; i < n; ++i)
    for (long j = i; j < n; ++j) {
      const KeepDecision dec = keep_entry(w.indices[i], w.indices[j], p);
      const long pairs = i == j ? 1 : 2;
      s.stage_histogram[size_t(dec.stage)] += pairs;
      if (!dec.kept) continue;
      s.nnz += pairs;
      ++row_nnz[size_t(i)];
      if (i != j) ++row_nnz[size_t(j)];
    }
  for (long c : row_nnz) s.max_row = std::max(s.max_row, c);
  return s;
}

inline std::vector<double> apply(const DenseMatrix& m, const std::vector<double>& v) {
  if (long(v.size()) != m.n) throw std::invalid_argument("apply: dimension mismatch");
  std::vector<double> out(v.size(), 0.0);
  for (long i = 0; i < m.n; ++i) {
    double acc = 0.0;
    const double* row = m.a.data() + size_t(i) * size_t(m.n);
    for (long j = 0; j < m.n; ++j) acc += row[j] * v[size_t(j)];
    out[size_t(i)] = acc;
  }
  return out;
}

inline std::vector<double> apply(const CompressedOperator& op, const std::vector<double>& v) {
  if (long(v.size()) != op.n) throw std::invalid_argument("apply: dimension mismatch");
  std::vector<double> out(v.size(), 0.0);
  for (long i = 0; i < op.n; ++i) {
    double acc = 0.0;
    for (long s = op.row_ptr[size_t(i)]; s < op.row_ptr[size_t(i) + 1]; ++s)
      acc += op.val[size_t(s)] * v[size_t(op.col[size_t(s)])];
    out[size_t(i)] = acc;
  }
  return out;
}

// (L - L_r) v without storing either matrix: entries are evaluated on the
// fly exactly where the cascade drops them, on the canonical pair half.
inline std::vector<double> dropped_apply(const BasisWindow& w, const Kernel& kernel,
                                         const CompressionParams& p, const QuadratureSpec& spec,
                                         const std::vector<double>& v) {
  validate(p);
  const long n = w.size();
  if (long(v.size()) != n) throw std::invalid_argument("dropped_apply: dimension mismatch");
  EntryEngine eng(w.family, kernel, p.q, spec);
  std::vector<double> out(v.size(), 0.0);
  for (long i = 0; i < n; ++i)
    for (long j = i; j < n; ++j) {
      if (keep_entry(w.indices[i], w.indices[j], p).kept) continue;
      const double e = eng.entry(w.indices[i], w.indices[j]);
      out[size_t(i)] += e * v[size_t(j)];
      if (j != i) out[size_t(j)] += e * v[size_t(i)];
    }
  return out;
}

}  // namespace anisowave

#endif
