#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sobi/error.hpp"
#include "sobi/matrix.hpp"
#include "sobi/model.hpp"

namespace sobi {

/// Eigen-whitening of the zero-lag covariance.
struct WhiteningResult {
  RealMatrix W;            // n x m, rows (λᵢ − σ²)^{-1/2} hᵢᵀ
  Index n = 0;             // retained sources
  double sigma2 = 0.0;     // noise variance estimate
  RealVector eigenvalues;  // all m, descending
  RealMatrix eigenvectors; // m x n, retained hᵢ as columns

  /// W⁺ = Σᵢ (λᵢ − σ²)^{1/2} hᵢ eᵢᵀ, the Moore-Penrose inverse of W.
  RealMatrix pseudo_inverse() const {
    RealVector scale = (eigenvalues.head(n).array() - sigma2).sqrt();
    return eigenvectors * scale.asDiagonal();
  }
};

/// Whitened, symmetrized covariances M(τ) for increasing lags.
struct LaggedCovarianceSet {
  std::vector<Index> lags;
  std::vector<RealMatrix> matrices;
  double max_asymmetry = 0.0; // largest |C − Cᵀ| entry removed by symmetrization

  std::size_t size() const { return matrices.size(); }
  Index dim() const { return matrices.empty() ? 0 : matrices.front().rows(); }

  /// Σ_k ||M_k||²_F
  double squared_norm() const {
    double s = 0.0;
    for (const auto& m : matrices)
      s += m.squaredNorm();
    return s;
  }
};

enum class WhiteningMethod { Eigen, Svd };

/// Subspace split below this eigenvalue ratio is not trusted; all channels are kept.
constexpr double kMinSubspaceGapRatio = 10.0;
constexpr double kPositiveDefiniteTol = 1e-12;
constexpr Index kMaxDefaultLags = 100;

/// Per-channel mean removed.
inline RealMatrix centered(const RealMatrix& data) {
  RealMatrix c = data;
  c.colwise() -= data.rowwise().mean();
  return c;
}

namespace detail {

inline void check_lag(Index lag, Index samples) {
  if (lag < 0 || 2 * lag >= samples)
    throw InvalidArgument("lag " + std::to_string(lag) + " outside [0, T/2) for T = " +
                          std::to_string(samples));
}

/// (1/(T−τ)) Σ_t x(t+τ) x(t)ᵀ on already centered data.
inline RealMatrix lagged_product(const RealMatrix& xc, Index lag) {
  const Index len = xc.cols() - lag;
  RealMatrix c = xc.middleCols(lag, len) * xc.leftCols(len).transpose();
  c /= static_cast<double>(len);
  return c;
}

inline void fix_signs(RealMatrix& vecs) {
  for (Index j = 0; j < vecs.cols(); ++j) {
    Index k = 0;
    vecs.col(j).cwiseAbs().maxCoeff(&k);
    if (vecs(k, j) < 0.0)
      vecs.col(j) = -vecs.col(j);
  }
}

/// Largest λᵢ/λᵢ₊₁ split; n = m when no split reaches kMinSubspaceGapRatio.
inline Index choose_source_count(const RealVector& desc) {
  const Index m = desc.size();
  Index best_n = m;
  double best = -1.0;
  for (Index i = 0; i + 1 < m; ++i) {
    const double lo = desc(i + 1);
    const double ratio = lo > 0.0 ? desc(i) / lo : std::numeric_limits<double>::infinity();
    if (ratio >= best) {
      best = ratio;
      best_n = i + 1;
    }
  }
  return best >= kMinSubspaceGapRatio ? best_n : m;
}

inline WhiteningResult build_whitening(RealVector desc, RealMatrix vecs, std::optional<Index> n) {
  const Index m = desc.size();
  if (n && (*n < 1 || *n > m))
    throw InvalidArgument("source count " + std::to_string(*n) + " outside [1, " +
                          std::to_string(m) + "]");
  WhiteningResult wr;
  wr.n = n ? *n : choose_source_count(desc);
  wr.sigma2 = wr.n < m ? desc.tail(m - wr.n).mean() : 0.0;
  wr.eigenvalues = std::move(desc);
  const double lambda1 = wr.eigenvalues(0);
  const double margin = wr.eigenvalues(wr.n - 1) - wr.sigma2;
  if (!(lambda1 > 0.0) || margin <= kPositiveDefiniteTol * lambda1)
    throw DegenerateSpectrumError(
        "degenerate signal subspace: lambda_n - sigma^2 = " + std::to_string(margin) +
        " with lambda_1 = " + std::to_string(lambda1) + " (n = " + std::to_string(wr.n) + ")");
  wr.eigenvectors = vecs.leftCols(wr.n);
  fix_signs(wr.eigenvectors);
  RealVector inv = (wr.eigenvalues.head(wr.n).array() - wr.sigma2).rsqrt();
  wr.W = inv.asDiagonal() * wr.eigenvectors.transpose();
  return wr;
}

} // namespace detail

/// Centered lagged covariance R̂(τ), m x m.
inline RealMatrix sample_covariance(const Recording& rec, Index lag) {
  detail::check_lag(lag, rec.samples());
  require_finite(rec.data, "recording");
  return detail::lagged_product(centered(rec.data), lag);
}

/// Whitening from a zero-lag covariance. Without `n` the source count comes
/// from the largest relative eigengap.
inline WhiteningResult estimate_whitening(const RealMatrix& r0, std::optional<Index> n = {}) {
  require_square(r0, "zero-lag covariance");
  require_finite(r0, "zero-lag covariance");
  Eigen::SelfAdjointEigenSolver<RealMatrix> es(symmetrized(r0));
  if (es.info() != Eigen::Success)
    throw ConvergenceError("symmetric eigensolver failed on the zero-lag covariance");
  return detail::build_whitening(es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse(),
                                 n);
}

/// Same result as estimate_whitening(sample_covariance(rec, 0), n), computed
/// from the thin SVD of the centered data instead.
inline WhiteningResult estimate_whitening_svd(const Recording& rec, std::optional<Index> n = {}) {
  require_finite(rec.data, "recording");
  RealMatrix xc = centered(rec.data) / std::sqrt(static_cast<double>(rec.samples()));
  Eigen::BDCSVD<RealMatrix> svd(xc, Eigen::ComputeThinU);
  RealVector lambda = svd.singularValues().array().square();
  return detail::build_whitening(std::move(lambda), svd.matrixU(), n);
}

/// τ = 1..min(100, ⌊T/3⌋).
inline std::vector<Index> default_lags(Index samples) {
  const Index count = std::min(kMaxDefaultLags, samples / 3);
  std::vector<Index> lags;
  for (Index j = 1; j <= count; ++j)
    lags.push_back(j);
  return lags;
}

inline void validate_lags(const std::vector<Index>& lags, Index samples) {
  if (lags.empty())
    throw InvalidArgument("lag list is empty");
  for (std::size_t i = 0; i < lags.size(); ++i) {
    if (lags[i] < 1)
      throw InvalidArgument("lags must be positive, got " + std::to_string(lags[i]));
    if (i > 0 && lags[i] <= lags[i - 1])
      throw InvalidArgument("lags must be strictly increasing");
  }
  detail::check_lag(lags.back(), samples);
}

/// M(τ) = ½(C + Cᵀ) with C = W R̂(τ) Wᵀ, in lag order.
inline LaggedCovarianceSet whitened_lagged_set(const Recording& rec, const WhiteningResult& wr,
                                               const std::vector<Index>& lags) {
  validate_lags(lags, rec.samples());
  if (wr.W.cols() != rec.channels())
    throw InvalidArgument("whitening matrix " + shape_string(wr.W) + " does not match " +
                          std::to_string(rec.channels()) + " channels");
  require_finite(rec.data, "recording");
  // W R̂(τ) Wᵀ computed as the lagged product of the whitened signals g = W x.
  const RealMatrix g = wr.W * centered(rec.data);
  LaggedCovarianceSet set;
  set.lags = lags;
  set.matrices.reserve(lags.size());
  for (Index lag : lags) {
    RealMatrix c = detail::lagged_product(g, lag);
    set.max_asymmetry = std::max(set.max_asymmetry, (c - c.transpose()).cwiseAbs().maxCoeff());
    set.matrices.push_back(symmetrized(c));
  }
  return set;
}

} // namespace sobi
