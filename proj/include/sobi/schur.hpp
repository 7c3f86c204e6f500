#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "sobi/error.hpp"
#include "sobi/givens.hpp"
#include "sobi/matrix.hpp"
#include "sobi/whitening.hpp"

namespace sobi {

/// M = Q B Qᵀ with Q orthogonal and B quasi-upper-triangular.
struct SchurFactors {
  RealMatrix Q;
  RealMatrix B;
  Index iterations = 0; // Francis double-shift steps
};

namespace detail {

/// Reflector P = I − beta·v·vᵀ with P x = alpha e₁. beta = 0 means identity.
template <int N>
struct Reflector {
  std::array<double, N> v{};
  double beta = 0.0;

  explicit Reflector(const std::array<double, N>& x) {
    double norm2 = 0.0;
    for (double e : x)
      norm2 += e * e;
    if (norm2 == 0.0)
      return;
    const double alpha = x[0] > 0.0 ? -std::sqrt(norm2) : std::sqrt(norm2);
    v = x;
    v[0] -= alpha;
    double vv = 0.0;
    for (double e : v)
      vv += e * e;
    if (vv == 0.0)
      return;
    beta = 2.0 / vv;
  }

  /// Rows k..k+N−1 of `a`, columns [c0, c1).
  void apply_left(RealMatrix& a, Index k, Index c0, Index c1) const {
    if (beta == 0.0)
      return;
    for (Index j = c0; j < c1; ++j) {
      double dot = 0.0;
      for (int i = 0; i < N; ++i)
        dot += v[i] * a(k + i, j);
      dot *= beta;
      for (int i = 0; i < N; ++i)
        a(k + i, j) -= dot * v[i];
    }
  }

  /// Columns k..k+N−1 of `a`, rows [r0, r1).
  void apply_right(RealMatrix& a, Index k, Index r0, Index r1) const {
    if (beta == 0.0)
      return;
    for (Index r = r0; r < r1; ++r) {
      double dot = 0.0;
      for (int i = 0; i < N; ++i)
        dot += a(r, k + i) * v[i];
      dot *= beta;
      for (int i = 0; i < N; ++i)
        a(r, k + i) -= dot * v[i];
    }
  }
};

/// Householder reduction to upper Hessenberg form, accumulating Q.
inline void reduce_to_hessenberg(RealMatrix& h, RealMatrix& q) {
  const Index n = h.rows();
  RealVector v;
  for (Index k = 0; k + 2 < n; ++k) {
    const Index len = n - k - 1;
    v = h.col(k).tail(len);
    const double norm = v.norm();
    if (norm == 0.0)
      continue;
    const double alpha = v(0) > 0.0 ? -norm : norm;
    v(0) -= alpha;
    const double vv = v.squaredNorm();
    if (vv == 0.0)
      continue;
    const double beta = 2.0 / vv;
    // H ← P H P, Q ← Q P with P = I − beta v vᵀ on indices k+1..n−1.
    auto rows = h.bottomRows(len);
    RealVector w = beta * (v.transpose() * rows).transpose();
    rows.noalias() -= v * w.transpose();
    auto cols = h.rightCols(len);
    w = beta * (cols * v);
    cols.noalias() -= w * v.transpose();
    auto qcols = q.rightCols(len);
    w = beta * (qcols * v);
    qcols.noalias() -= w * v.transpose();
    h.col(k).tail(len - 1).setZero();
    h(k + 1, k) = alpha;
  }
}

/// Plane rotation on (p, p+1) applied as H ← Gᵀ H G, Q ← Q G.
inline void rotate_pair(RealMatrix& h, RealMatrix& q, Index p, double c, double s) {
  const Index n = h.rows();
  for (Index j = 0; j < n; ++j) {
    const double a = h(p, j), b = h(p + 1, j);
    h(p, j) = c * a + s * b;
    h(p + 1, j) = c * b - s * a;
  }
  for (Index i = 0; i < n; ++i) {
    const double a = h(i, p), b = h(i, p + 1);
    h(i, p) = c * a + s * b;
    h(i, p + 1) = c * b - s * a;
    const double qa = q(i, p), qb = q(i, p + 1);
    q(i, p) = c * qa + s * qb;
    q(i, p + 1) = c * qb - s * qa;
  }
}

/// Triangularizes the 2x2 block at (p, p) when its eigenvalues are real.
inline void split_real_block(RealMatrix& h, RealMatrix& q, Index p) {
  const double a = h(p, p), b = h(p, p + 1), c = h(p + 1, p), d = h(p + 1, p + 1);
  if (c == 0.0)
    return;
  const double half = 0.5 * (a - d);
  const double disc = half * half + b * c;
  if (disc < 0.0)
    return; // complex pair: keep the bump
  const double root = std::sqrt(disc);
  const double mu = 0.5 * (a + d) + (half >= 0.0 ? root : -root);
  // Eigenvector for mu: either (b, mu − a) or (mu − d, c); take the longer.
  double x = b, y = mu - a;
  if (std::hypot(mu - d, c) > std::hypot(x, y)) {
    x = mu - d;
    y = c;
  }
  const double r = std::hypot(x, y);
  if (r == 0.0)
    return;
  rotate_pair(h, q, p, x / r, y / r);
  h(p + 1, p) = 0.0;
}

} // namespace detail

/// Real Schur decomposition by Hessenberg reduction and Francis double-shift
/// QR iteration with deflation. Budget: 30n Francis steps.
inline SchurFactors real_schur(const RealMatrix& m) {
  require_square(m, "real_schur");
  require_finite(m, "real_schur");
  const Index n = m.rows();
  SchurFactors f;
  f.B = m;
  f.Q = RealMatrix::Identity(n, n);
  RealMatrix& h = f.B;
  RealMatrix& q = f.Q;
  detail::reduce_to_hessenberg(h, q);

  const double eps = std::numeric_limits<double>::epsilon();
  const double hnorm = std::max(h.norm(), std::numeric_limits<double>::min());
  const Index budget = 30 * n;
  Index hi = n - 1;
  Index block_iters = 0;

  while (hi > 0) {
    // Find the top of the unreduced block ending at hi.
    Index lo = hi;
    while (lo > 0) {
      double scale = std::abs(h(lo - 1, lo - 1)) + std::abs(h(lo, lo));
      if (scale == 0.0)
        scale = hnorm;
      if (std::abs(h(lo, lo - 1)) <= eps * scale) {
        h(lo, lo - 1) = 0.0;
        break;
      }
      --lo;
    }
    if (lo == hi) {
      --hi;
      block_iters = 0;
      continue;
    }
    if (lo == hi - 1) {
      detail::split_real_block(h, q, hi - 1);
      hi -= 2;
      block_iters = 0;
      continue;
    }
    if (f.iterations >= budget)
      throw ConvergenceError("real_schur: QR iteration did not converge within " +
                             std::to_string(budget) + " steps");
    ++f.iterations;
    ++block_iters;

    double s = 0.0, t = 0.0; // shift sum and product
    if (block_iters % 11 == 10) {
      const double ex = std::abs(h(hi, hi - 1)) + std::abs(h(hi - 1, hi - 2));
      s = 1.5 * ex;
      t = ex * ex;
    } else {
      s = h(hi - 1, hi - 1) + h(hi, hi);
      t = h(hi - 1, hi - 1) * h(hi, hi) - h(hi - 1, hi) * h(hi, hi - 1);
    }
    double x = h(lo, lo) * h(lo, lo) + h(lo, lo + 1) * h(lo + 1, lo) - s * h(lo, lo) + t;
    double y = h(lo + 1, lo) * (h(lo, lo) + h(lo + 1, lo + 1) - s);
    double z = h(lo + 1, lo) * h(lo + 2, lo + 1);
    for (Index k = lo; k + 2 <= hi; ++k) {
      const detail::Reflector<3> p({x, y, z});
      const Index r = std::max(lo, k - 1);
      p.apply_left(h, k, r, n);
      p.apply_right(h, k, 0, std::min(k + 3, hi) + 1);
      p.apply_right(q, k, 0, n);
      if (k > lo) {
        h(k + 1, k - 1) = 0.0;
        h(k + 2, k - 1) = 0.0;
      }
      x = h(k + 1, k);
      y = h(k + 2, k);
      if (k + 3 <= hi)
        z = h(k + 3, k);
    }
    const detail::Reflector<2> p({x, y});
    p.apply_left(h, hi - 1, hi - 2, n);
    p.apply_right(h, hi - 1, 0, hi + 1);
    p.apply_right(q, hi - 1, 0, n);
    h(hi, hi - 2) = 0.0;
  }
  return f;
}

/// Unit eigenvectors of an upper-triangular matrix with distinct diagonal,
/// column i by back-substitution of (B − bᵢᵢ I) v = 0.
/// `gap_tol` <= 0 selects 1e-8·‖B‖_F.
inline RealMatrix triangular_eigenvectors(const RealMatrix& b, double gap_tol = 0.0) {
  require_square(b, "triangular_eigenvectors");
  require_finite(b, "triangular_eigenvectors");
  const Index n = b.rows();
  const double norm = b.norm();
  for (Index j = 0; j < n; ++j)
    for (Index i = j + 1; i < n; ++i)
      if (std::abs(b(i, j)) > std::numeric_limits<double>::epsilon() * norm)
        throw InvalidArgument(
            i == j + 1 ? "triangular_eigenvectors: 2x2 block at (" + std::to_string(j) + ", " +
                             std::to_string(i) +
                             ") means a complex conjugate eigenvalue pair, which is not supported"
                       : "triangular_eigenvectors: matrix is not upper triangular");
  const double tol = gap_tol > 0.0 ? gap_tol : 1e-8 * norm;
  Index a = 0, c = 0;
  const RealVector diag = b.diagonal();
  const double gap = min_pairwise_gap(diag, &a, &c);
  if (n > 1 && gap <= tol) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "degenerate spectrum: eigenvalues %td (%.17g) and %td (%.17g) differ by %.3g <= %.3g",
                  static_cast<std::ptrdiff_t>(a), diag(a), static_cast<std::ptrdiff_t>(c), diag(c), gap, tol);
    throw DegenerateSpectrumError(buf);
  }
  RealMatrix v = RealMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    v(i, i) = 1.0;
    for (Index j = i - 1; j >= 0; --j) {
      double sum = 0.0;
      for (Index k = j + 1; k <= i; ++k)
        sum += b(j, k) * v(k, i);
      v(j, i) = -sum / (b(j, j) - diag(i));
    }
    v.col(i).normalize();
  }
  return v;
}

enum class LagChoice { First, BestGap };

struct SchurOptions {
  LagChoice lag_choice = LagChoice::First;
  double gap_tol_rel = 1e-8;
};

struct SchurSobiResult {
  RealMatrix U;
  double eigengap = 0.0;     // min pairwise |bᵢᵢ − bⱼⱼ| of the selected matrix
  double residual_off = 0.0; // Σ_k off(Uᵀ M_k U) over the whole set
  std::size_t selected = 0;  // index into the set
  Index schur_iterations = 0;
};

namespace detail {

/// Orthonormal factor of a thin QR with positive R diagonal.
inline RealMatrix orthonormalize(const RealMatrix& v) {
  Eigen::HouseholderQR<RealMatrix> qr(v);
  RealMatrix q = qr.householderQ() * RealMatrix::Identity(v.rows(), v.cols());
  const auto& r = qr.matrixQR();
  for (Index j = 0; j < v.cols(); ++j)
    if (r(j, j) < 0.0)
      q.col(j) = -q.col(j);
  return q;
}

} // namespace detail

/// Unmixing matrix U = Q·V from the Schur form of one lagged covariance.
inline SchurSobiResult schur_unmixer(const std::vector<RealMatrix>& set, const SchurOptions& opts = {}) {
  detail::check_symmetric_set(set, "schur_unmixer");

  SchurSobiResult res;
  SchurFactors factors;
  if (opts.lag_choice == LagChoice::First) {
    factors = real_schur(set.front());
  } else {
    double best = -1.0;
    for (std::size_t k = 0; k < set.size(); ++k) {
      SchurFactors candidate = real_schur(set[k]);
      const double gap = min_pairwise_gap(candidate.B.diagonal());
      if (gap > best) {
        best = gap;
        factors = std::move(candidate);
        res.selected = k;
      }
    }
  }
  res.schur_iterations = factors.iterations;
  res.eigengap = min_pairwise_gap(factors.B.diagonal());

  RealMatrix v;
  try {
    v = triangular_eigenvectors(factors.B, opts.gap_tol_rel * factors.B.norm());
  } catch (const DegenerateSpectrumError& e) {
    if (opts.lag_choice == LagChoice::First)
      throw DegenerateSpectrumError(std::string(e.what()) +
                                    " in the first lagged covariance; try lag choice best-gap");
    throw;
  }
  res.U = factors.Q * detail::orthonormalize(v);
  canonicalize_unmixer(res.U, set.front());
  res.residual_off = total_off(set, res.U);
  return res;
}

inline SchurSobiResult schur_unmixer(const LaggedCovarianceSet& set, const SchurOptions& opts = {}) {
  return schur_unmixer(set.matrices, opts);
}

} // namespace sobi
