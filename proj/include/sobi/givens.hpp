#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "sobi/error.hpp"
#include "sobi/matrix.hpp"
#include "sobi/whitening.hpp"

namespace sobi {

/// Sum of squared off-diagonal entries.
inline double off(const RealMatrix& m) {
  require_square(m, "off");
  double s = 0.0;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j)
        s += m(i, j) * m(i, j);
  return s;
}

/// Σ_k off(Uᵀ M_k U).
inline double total_off(const std::vector<RealMatrix>& set, const RealMatrix& u) {
  double s = 0.0;
  for (const auto& m : set)
    s += off(u.transpose() * m * u);
  return s;
}

inline double total_off(const std::vector<RealMatrix>& set) {
  double s = 0.0;
  for (const auto& m : set)
    s += off(m);
  return s;
}

/// Smallest pairwise distance between entries of `v` (infinity for size < 2).
inline double min_pairwise_gap(const RealVector& v, Index* first = nullptr, Index* second = nullptr) {
  double gap = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < v.size(); ++i)
    for (Index j = i + 1; j < v.size(); ++j) {
      const double d = std::abs(v(i) - v(j));
      if (d < gap) {
        gap = d;
        if (first)
          *first = i;
        if (second)
          *second = j;
      }
    }
  return gap;
}

/// Orders columns of `u` by descending diagonal of Uᵀ M U and makes each
/// column's largest-magnitude entry positive.
inline void canonicalize_unmixer(RealMatrix& u, const RealMatrix& reference) {
  const RealVector d = (u.transpose() * reference * u).diagonal();
  std::vector<Index> order(static_cast<std::size_t>(u.cols()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return d(a) > d(b); });
  RealMatrix sorted(u.rows(), u.cols());
  for (Index j = 0; j < u.cols(); ++j) {
    sorted.col(j) = u.col(order[static_cast<std::size_t>(j)]);
    Index k = 0;
    sorted.col(j).cwiseAbs().maxCoeff(&k);
    if (sorted(k, j) < 0.0)
      sorted.col(j) = -sorted.col(j);
  }
  u = std::move(sorted);
}

struct JacobiOptions {
  double tol = 0.0;     // <= 0 selects 1e-8 / sqrt(n)
  Index max_sweeps = 100;
  /// Called after every applied rotation with the current working set.
  std::function<void(const std::vector<RealMatrix>&)> on_rotation;
};

struct JadeResult {
  RealMatrix U;
  Index sweeps = 0;
  Index rotations_applied = 0;
  std::vector<double> off_history; // [0] is the input, then one entry per sweep
  double final_off = 0.0;
  bool converged = false;
  double eigengap = 0.0; // min pairwise gap of diag(Uᵀ M(τ₁) U)
};

inline double default_jacobi_tol(Index n) { return 1e-8 / std::sqrt(static_cast<double>(n)); }

namespace detail {

inline void check_symmetric_set(const std::vector<RealMatrix>& set, const char* what) {
  if (set.empty())
    throw InvalidArgument(std::string(what) + ": empty matrix set");
  const Index n = set.front().rows();
  for (std::size_t k = 0; k < set.size(); ++k) {
    const auto& m = set[k];
    require_square(m, what);
    if (m.rows() != n)
      throw InvalidArgument(std::string(what) + ": matrix " + std::to_string(k) + " is " +
                            shape_string(m) + ", expected " + std::to_string(n) + "x" +
                            std::to_string(n));
    require_finite(m, what);
    const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw InvalidArgument(std::string(what) + ": matrix " + std::to_string(k) +
                            " is not symmetric");
  }
}

/// M ← Gᵀ M G for the plane rotation G = [c −s; s c] acting on (p, q).
inline void rotate_symmetric(RealMatrix& m, Index p, Index q, double c, double s) {
  const Index n = m.rows();
  double* cp = m.col(p).data();
  double* cq = m.col(q).data();
  for (Index i = 0; i < n; ++i) {
    const double a = cp[i];
    const double b = cq[i];
    cp[i] = c * a + s * b;
    cq[i] = c * b - s * a;
  }
  const double pp = cp[p], qp = cp[q], pq = cq[p], qq = cq[q];
  const double cross = 0.5 * ((c * qp - s * pp) + (c * pq + s * qq));
  cp[p] = c * pp + s * qp;
  cp[q] = cross;
  cq[p] = cross;
  cq[q] = c * qq - s * pq;
  for (Index i = 0; i < n; ++i) {
    m(p, i) = cp[i];
    m(q, i) = cq[i];
  }
}

} // namespace detail

/// Joint approximate diagonalization of symmetric matrices by Jacobi sweeps.
///
/// For each pair p < q the angle minimizing Σ_k off(M_k) in that plane is the
/// half-angle of the principal eigenvector of Σ_k g_k g_kᵀ with
/// g_k = [M_pp − M_qq, M_pq + M_qp]. A rotation is skipped when |sin θ| < tol
/// and iteration stops after a sweep with no rotation.
inline JadeResult joint_diagonalize(const std::vector<RealMatrix>& set, const JacobiOptions& opts = {}) {
  detail::check_symmetric_set(set, "joint_diagonalize");
  const Index n = set.front().rows();
  const double tol = opts.tol > 0.0 ? opts.tol : default_jacobi_tol(n);
  if (opts.max_sweeps < 1)
    throw InvalidArgument("max_sweeps must be >= 1");

  std::vector<RealMatrix> work;
  work.reserve(set.size());
  for (const auto& m : set)
    work.push_back(symmetrized(m));

  JadeResult res;
  res.U = RealMatrix::Identity(n, n);
  res.off_history.push_back(total_off(work));

  while (res.sweeps < opts.max_sweeps) {
    ++res.sweeps;
    bool rotated = false;
    for (Index p = 0; p + 1 < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        double g11 = 0.0, g12 = 0.0, g22 = 0.0;
        for (const auto& m : work) {
          const double d = m(p, p) - m(q, q);
          const double o = m(p, q) + m(q, p);
          g11 += d * d;
          g12 += d * o;
          g22 += o * o;
        }
        const double theta = 0.25 * std::atan2(2.0 * g12, g11 - g22);
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        if (std::abs(s) < tol)
          continue;
        rotated = true;
        ++res.rotations_applied;
        for (auto& m : work)
          detail::rotate_symmetric(m, p, q, c, s);
        for (Index i = 0; i < n; ++i) {
          const double a = res.U(i, p);
          const double b = res.U(i, q);
          res.U(i, p) = c * a + s * b;
          res.U(i, q) = c * b - s * a;
        }
        if (opts.on_rotation)
          opts.on_rotation(work);
      }
    }
    res.off_history.push_back(total_off(work));
    if (!rotated) {
      res.converged = true;
      break;
    }
  }

  canonicalize_unmixer(res.U, set.front());
  res.final_off = total_off(set, res.U);
  res.eigengap = min_pairwise_gap((res.U.transpose() * set.front() * res.U).diagonal());
  return res;
}

inline JadeResult joint_diagonalize(const LaggedCovarianceSet& set, const JacobiOptions& opts = {}) {
  return joint_diagonalize(set.matrices, opts);
}

} // namespace sobi
