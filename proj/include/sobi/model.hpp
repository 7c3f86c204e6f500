#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "sobi/error.hpp"
#include "sobi/matrix.hpp"
#include "sobi/random.hpp"

namespace sobi {

/// Multichannel time series: `data` is channels x samples.
struct Recording {
  RealMatrix data;
  double sample_rate = 0.0; // Hz, 0 = unknown
  std::vector<std::string> labels;

  Index channels() const { return data.rows(); }
  Index samples() const { return data.cols(); }
};

inline std::vector<std::string> default_labels(Index m) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i)
    out.push_back("ch" + std::to_string(i + 1));
  return out;
}

/// Checks the invariants a separation run needs (finite data, T > m, labels).
inline void validate(const Recording& rec) {
  require_finite(rec.data, "recording");
  if (rec.samples() <= rec.channels())
    throw InvalidArgument("recording needs more samples than channels (got " +
                          shape_string(rec.data) + ")");
  if (!rec.labels.empty() && static_cast<Index>(rec.labels.size()) != rec.channels())
    throw InvalidArgument("recording has " + std::to_string(rec.labels.size()) +
                          " labels for " + std::to_string(rec.channels()) + " channels");
}

struct Ar1 {
  double coefficient;
};

struct Sinusoid {
  double frequency; // Hz
};

using SourceKind = std::variant<Ar1, Sinusoid>;

/// One entry per source. Sinusoid frequencies are interpreted at `sample_rate`.
struct SourceSpec {
  std::vector<SourceKind> sources;
  double sample_rate = 160.0;

  Index size() const { return static_cast<Index>(sources.size()); }
};

/// Mixing, sources and noise level of a synthetic recording.
struct GroundTruth {
  RealMatrix mixing;  // m x n
  RealMatrix sources; // n x T
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

constexpr Index kMinGeneratedSamples = 256;
constexpr Index kAr1BurnIn = 256;
constexpr double kMinAr1Gap = 0.05;
constexpr double kMaxAr1Magnitude = 0.99;

inline void validate(const SourceSpec& spec) {
  if (spec.sources.empty())
    throw InvalidArgument("source spec is empty");
  std::vector<double> phis;
  std::vector<double> freqs;
  for (const auto& s : spec.sources) {
    if (const auto* ar = std::get_if<Ar1>(&s)) {
      if (!std::isfinite(ar->coefficient) || std::abs(ar->coefficient) > kMaxAr1Magnitude)
        throw InvalidArgument("AR1 coefficient " + std::to_string(ar->coefficient) +
                              " outside [-0.99, 0.99]");
      phis.push_back(ar->coefficient);
    } else {
      const double f = std::get<Sinusoid>(s).frequency;
      if (!(f > 0.0) || !(f < spec.sample_rate / 2.0))
        throw InvalidArgument("sinusoid frequency " + std::to_string(f) +
                              " Hz outside (0, Nyquist)");
      freqs.push_back(f);
    }
  }
  std::sort(phis.begin(), phis.end());
  for (std::size_t i = 1; i < phis.size(); ++i)
    if (phis[i] - phis[i - 1] < kMinAr1Gap - 1e-12)
      throw InvalidArgument("AR1 coefficients " + std::to_string(phis[i - 1]) + " and " +
                            std::to_string(phis[i]) +
                            " are closer than 0.05; sources need distinct autocovariances");
  std::sort(freqs.begin(), freqs.end());
  for (std::size_t i = 1; i < freqs.size(); ++i)
    if (freqs[i] == freqs[i - 1])
      throw InvalidArgument("duplicate sinusoid frequency " + std::to_string(freqs[i]) + " Hz");
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for (seed, purpose, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ (purpose * 0x632be59bd9b4e019ULL)) + index);
}

inline void normalize_row(Eigen::Ref<RealVector> row) {
  row.array() -= row.mean();
  const double sd = std::sqrt(row.squaredNorm() / static_cast<double>(row.size()));
  if (sd > 0.0)
    row /= sd;
}

} // namespace detail

/// Zero-mean, unit-variance (sample-normalized) source rows, deterministic in `seed`.
inline RealMatrix generate_sources(const SourceSpec& spec, Index samples, std::uint64_t seed) {
  if (samples < kMinGeneratedSamples)
    throw InvalidArgument("need at least 256 samples, got " + std::to_string(samples));
  validate(spec);
  RealMatrix s(spec.size(), samples);
  for (Index i = 0; i < spec.size(); ++i) {
    Rng rng(detail::derive_seed(seed, 1, static_cast<std::uint64_t>(i)));
    RealVector row(samples);
    const auto& kind = spec.sources[static_cast<std::size_t>(i)];
    if (const auto* ar = std::get_if<Ar1>(&kind)) {
      double x = rng.normal();
      for (Index t = 0; t < kAr1BurnIn; ++t)
        x = ar->coefficient * x + rng.normal();
      for (Index t = 0; t < samples; ++t) {
        x = ar->coefficient * x + rng.normal();
        row(t) = x;
      }
    } else {
      const double w = 2.0 * std::numbers::pi * std::get<Sinusoid>(kind).frequency / spec.sample_rate;
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      for (Index t = 0; t < samples; ++t)
        row(t) = std::sin(w * static_cast<double>(t) + phase);
    }
    detail::normalize_row(row);
    s.row(i) = row.transpose();
  }
  return s;
}

inline RealMatrix random_orthogonal(Index n, Rng& rng) {
  RealMatrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      g(i, j) = rng.normal();
  Eigen::HouseholderQR<RealMatrix> qr(g);
  RealMatrix q = qr.householderQ();
  const RealMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0)
      q.col(j) = -q.col(j);
  return q;
}

/// m x n Gaussian mixing matrix (orthonormal columns when m == n).
inline RealMatrix random_mixing(Index m, Index n, std::uint64_t seed, bool orthogonal = true) {
  if (n < 1 || m < n)
    throw InvalidArgument("mixing needs channels >= sources >= 1 (got " + std::to_string(m) +
                          " channels, " + std::to_string(n) + " sources)");
  Rng rng(detail::derive_seed(seed, 2));
  if (orthogonal)
    return random_orthogonal(m, rng).leftCols(n);
  RealMatrix a(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i)
      a(i, j) = rng.normal();
  return a;
}

inline bool has_full_column_rank(const RealMatrix& a) {
  Eigen::BDCSVD<RealMatrix> svd(a);
  const auto& s = svd.singularValues();
  return s.size() == a.cols() && s(s.size() - 1) > 1e-10 * s(0);
}

/// x = A s + n with Gaussian i.i.d. noise of standard deviation `noise_sigma`.
inline Recording mix(const GroundTruth& truth) {
  const auto& a = truth.mixing;
  const auto& s = truth.sources;
  if (a.size() == 0 || s.size() == 0 || a.cols() != s.rows())
    throw InvalidArgument("mixing " + shape_string(a) + " does not match sources " +
                          shape_string(s));
  if (!(truth.noise_sigma >= 0.0) || !std::isfinite(truth.noise_sigma))
    throw InvalidArgument("noise sigma must be finite and >= 0");
  require_finite(a, "mixing");
  require_finite(s, "sources");

  Recording rec;
  rec.data = a * s;
  if (truth.noise_sigma > 0.0) {
    Rng rng(detail::derive_seed(truth.seed, 3));
    for (Index t = 0; t < rec.data.cols(); ++t)
      for (Index i = 0; i < rec.data.rows(); ++i)
        rec.data(i, t) += truth.noise_sigma * rng.normal();
  }
  rec.labels = default_labels(rec.channels());
  return rec;
}

/// Spec with `n` sources having distinct lag-1 autocorrelations: up to 20
/// AR1 sources with coefficients 0.95, 0.90, ..., then sinusoids every 0.75 Hz.
inline SourceSpec default_source_spec(Index n, double sample_rate = 160.0) {
  SourceSpec spec;
  spec.sample_rate = sample_rate;
  for (Index i = 0; i < n; ++i) {
    if (i < 19)
      spec.sources.emplace_back(Ar1{0.95 - 0.05 * static_cast<double>(i)});
    else
      spec.sources.emplace_back(Sinusoid{0.75 * static_cast<double>(i - 18)});
  }
  return spec;
}

/// Sources from `spec`, mixing from `seed`, noise from `seed`.
inline GroundTruth make_ground_truth(const SourceSpec& spec, Index channels, Index samples,
                                     double noise_sigma, std::uint64_t seed,
                                     bool orthogonal_mixing = true) {
  GroundTruth truth;
  truth.sources = generate_sources(spec, samples, seed);
  truth.mixing = random_mixing(channels, spec.size(), seed, orthogonal_mixing);
  truth.noise_sigma = noise_sigma;
  truth.seed = seed;
  return truth;
}

} // namespace sobi
