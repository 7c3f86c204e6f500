#pragma once

#include <algorithm>
#include <cstring>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <sys/utsname.h>

#include <json.hpp>

#include "sobi/error.hpp"
#include "sobi/givens.hpp"
#include "sobi/matrix.hpp"
#include "sobi/model.hpp"
#include "sobi/schur.hpp"
#include "sobi/whitening.hpp"

namespace sobi {

enum class Method { Givens, Schur };

inline std::string to_string(Method m) { return m == Method::Givens ? "givens" : "schur"; }

inline Method parse_method(std::string_view s) {
  if (s == "givens")
    return Method::Givens;
  if (s == "schur")
    return Method::Schur;
  throw InvalidArgument("unknown method '" + std::string(s) + "' (expected givens or schur)");
}

inline std::string to_string(LagChoice c) { return c == LagChoice::First ? "first" : "best-gap"; }

inline LagChoice parse_lag_choice(std::string_view s) {
  if (s == "first")
    return LagChoice::First;
  if (s == "best-gap")
    return LagChoice::BestGap;
  throw InvalidArgument("unknown lag choice '" + std::string(s) + "' (expected first or best-gap)");
}

inline std::string to_string(WhiteningMethod w) { return w == WhiteningMethod::Eigen ? "eigen" : "svd"; }

inline WhiteningMethod parse_whitening(std::string_view s) {
  if (s == "eigen")
    return WhiteningMethod::Eigen;
  if (s == "svd")
    return WhiteningMethod::Svd;
  throw InvalidArgument("unknown whitening '" + std::string(s) + "' (expected eigen or svd)");
}

struct SeparationConfig {
  std::optional<Index> n;  // source count; largest eigengap rule when absent
  std::vector<Index> lags; // empty selects default_lags(T)
  double tol = 0.0;        // Jacobi threshold; <= 0 selects 1e-8/sqrt(n)
  Index max_sweeps = 100;
  LagChoice lag_choice = LagChoice::First;
  WhiteningMethod whitening = WhiteningMethod::Eigen;
};

struct SeparationDiagnostics {
  double final_off = 0.0; // Σ_k off(Uᵀ M_k U) over the lagged set
  Index sweeps = 0;       // givens
  Index rotations = 0;    // givens
  bool converged = true;
  double eigengap = 0.0;
  std::size_t selected_lag = 0; // schur: index of the diagonalized matrix
  Index n = 0;
  double sigma2 = 0.0;
  std::vector<Index> lags;
  double max_asymmetry = 0.0;
};

struct SeparationResult {
  Method method = Method::Givens;
  RealMatrix U;
  RealMatrix W;
  RealMatrix W_pinv;
  RealMatrix sources_hat; // n x T, Uᵀ W x(t)
  RealMatrix mixing_hat;  // m x n, W⁺ U
  double wall_time = 0.0; // seconds, algorithm only
  SeparationDiagnostics diagnostics;

  /// Uᵀ W, maps observations to source estimates.
  RealMatrix demixing() const { return U.transpose() * W; }
};

/// Whitening, lagged covariances, joint diagonalization and source recovery.
inline SeparationResult separate(const Recording& rec, Method method, const SeparationConfig& config = {}) {
  validate(rec);
  const std::vector<Index> lags = config.lags.empty() ? default_lags(rec.samples()) : config.lags;
  validate_lags(lags, rec.samples());

  const auto start = std::chrono::steady_clock::now();
  SeparationResult out;
  out.method = method;
  const WhiteningResult wr = config.whitening == WhiteningMethod::Eigen
                                 ? estimate_whitening(sample_covariance(rec, 0), config.n)
                                 : estimate_whitening_svd(rec, config.n);
  const LaggedCovarianceSet set = whitened_lagged_set(rec, wr, lags);
  auto& diag = out.diagnostics;
  if (method == Method::Givens) {
    JacobiOptions opts;
    opts.tol = config.tol;
    opts.max_sweeps = config.max_sweeps;
    JadeResult jd = joint_diagonalize(set, opts);
    out.U = std::move(jd.U);
    diag.final_off = jd.final_off;
    diag.sweeps = jd.sweeps;
    diag.rotations = jd.rotations_applied;
    diag.converged = jd.converged;
    diag.eigengap = jd.eigengap;
  } else {
    SchurOptions opts;
    opts.lag_choice = config.lag_choice;
    SchurSobiResult sr = schur_unmixer(set, opts);
    out.U = std::move(sr.U);
    diag.final_off = sr.residual_off;
    diag.eigengap = sr.eigengap;
    diag.selected_lag = sr.selected;
  }
  out.W = wr.W;
  out.W_pinv = wr.pseudo_inverse();
  out.sources_hat = out.U.transpose() * (out.W * rec.data);
  out.mixing_hat = out.W_pinv * out.U;
  out.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  diag.n = wr.n;
  diag.sigma2 = wr.sigma2;
  diag.lags = lags;
  diag.max_asymmetry = set.max_asymmetry;
  return out;
}

/// Distance of a global gain matrix from a scaled permutation, in [0, 1].
inline double amari_index(const RealMatrix& g) {
  require_square(g, "amari_index");
  const Index n = g.rows();
  if (n < 2)
    throw InvalidArgument("amari_index needs n >= 2");
  const RealMatrix a = g.cwiseAbs();
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double mx = a.row(i).maxCoeff();
    if (mx == 0.0)
      throw InvalidArgument("amari_index: row " + std::to_string(i) + " is zero");
    total += a.row(i).sum() / mx - 1.0;
  }
  for (Index j = 0; j < n; ++j) {
    const double mx = a.col(j).maxCoeff();
    if (mx == 0.0)
      throw InvalidArgument("amari_index: column " + std::to_string(j) + " is zero");
    total += a.col(j).sum() / mx - 1.0;
  }
  return total / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

struct MatchResult {
  std::vector<double> abs_corr;   // per true source
  std::vector<Index> assignment;  // true source i ↔ estimated row assignment[i]

  double min() const { return *std::min_element(abs_corr.begin(), abs_corr.end()); }
  double mean() const {
    double s = 0.0;
    for (double v : abs_corr)
      s += v;
    return s / static_cast<double>(abs_corr.size());
  }
};

/// Greedy matching on |corr|: largest entry first, its row and column retired.
inline MatchResult matched_correlation(const RealMatrix& s, const RealMatrix& s_hat) {
  if (s.rows() != s_hat.rows() || s.cols() != s_hat.cols())
    throw InvalidArgument("matched_correlation: shapes " + shape_string(s) + " and " +
                          shape_string(s_hat) + " differ");
  if (s.cols() < 2)
    throw InvalidArgument("matched_correlation: need at least 2 samples");
  auto standardize = [](const RealMatrix& x, const char* what) {
    RealMatrix z = centered(x);
    for (Index i = 0; i < z.rows(); ++i) {
      const double norm = z.row(i).norm();
      if (norm == 0.0)
        throw InvalidArgument(std::string("matched_correlation: ") + what + " row " +
                              std::to_string(i) + " has zero variance");
      z.row(i) /= norm;
    }
    return z;
  };
  RealMatrix c = (standardize(s, "true") * standardize(s_hat, "estimated").transpose()).cwiseAbs();
  const Index n = s.rows();
  MatchResult out;
  out.abs_corr.assign(static_cast<std::size_t>(n), 0.0);
  out.assignment.assign(static_cast<std::size_t>(n), -1);
  for (Index k = 0; k < n; ++k) {
    Index i = 0, j = 0;
    c.maxCoeff(&i, &j);
    out.abs_corr[static_cast<std::size_t>(i)] = std::min(1.0, c(i, j));
    out.assignment[static_cast<std::size_t>(i)] = j;
    c.row(i).setConstant(-1.0);
    c.col(j).setConstant(-1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Benchmark harness
// ---------------------------------------------------------------------------

struct MethodTiming {
  Method method = Method::Givens;
  std::vector<double> wall_times;
  double median = 0.0;
  double best = 0.0;
  bool outputs_identical = true; // every repeat produced bit-identical Ŝ
  std::optional<double> amari;
  std::vector<double> matched_corr;
  SeparationDiagnostics diagnostics;
};

struct BenchReport {
  Index m = 0, T = 0, L = 0, n = 0;
  std::string source;
  std::vector<MethodTiming> methods;
  double speedup = 0.0; // median(methods[0]) / median(methods[1])
  SeparationConfig config;
  Index repeats = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty())
    throw InvalidArgument("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Times each method `repeats` times after one untimed warm-up run.
/// Speedup is median(first method) / median(second method).
inline BenchReport bench(const Recording& rec, const SeparationConfig& config, Index repeats,
                         const GroundTruth* truth = nullptr,
                         std::vector<Method> methods = {Method::Givens, Method::Schur},
                         std::string source = "recording") {
  if (repeats < 3)
    throw InvalidArgument("bench needs repeats >= 3, got " + std::to_string(repeats));
  if (methods.size() != 2)
    throw InvalidArgument("bench compares exactly two methods");
  BenchReport report;
  report.m = rec.channels();
  report.T = rec.samples();
  report.config = config;
  report.repeats = repeats;
  report.source = std::move(source);

  for (Method method : methods) {
    MethodTiming timing;
    timing.method = method;
    SeparationResult first;
    try {
      first = separate(rec, method, config); // warm-up
      for (Index r = 0; r < repeats; ++r) {
        SeparationResult res = separate(rec, method, config);
        timing.wall_times.push_back(res.wall_time);
        if (res.sources_hat.size() != first.sources_hat.size() ||
            std::memcmp(res.sources_hat.data(), first.sources_hat.data(),
                        sizeof(double) * static_cast<std::size_t>(res.sources_hat.size())) != 0)
          timing.outputs_identical = false;
      }
    } catch (const Error& e) {
      throw Error("bench: method " + to_string(method) + " failed: " + e.what());
    }
    timing.median = median(timing.wall_times);
    timing.best = *std::min_element(timing.wall_times.begin(), timing.wall_times.end());
    timing.diagnostics = first.diagnostics;
    if (truth) {
      if (truth->mixing.rows() == rec.channels() && truth->mixing.cols() == first.U.cols())
        timing.amari = amari_index(first.demixing() * truth->mixing);
      if (truth->sources.rows() == first.sources_hat.rows() &&
          truth->sources.cols() == first.sources_hat.cols())
        timing.matched_corr = matched_correlation(truth->sources, first.sources_hat).abs_corr;
    }
    report.n = first.diagnostics.n;
    report.L = static_cast<Index>(first.diagnostics.lags.size());
    report.methods.push_back(std::move(timing));
  }
  report.speedup = report.methods[0].median / report.methods[1].median;
  return report;
}

inline nlohmann::json environment_metadata() {
  nlohmann::json env;
  utsname u{};
  if (uname(&u) == 0)
    env["host"] = std::string(u.sysname) + " " + u.release + " " + u.machine;
#if defined(__clang__)
  env["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = std::string("gcc ") + __VERSION__;
#endif
#ifdef NDEBUG
  env["build_profile"] = "release";
#else
  env["build_profile"] = "debug";
#endif
  env["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                         "." + std::to_string(EIGEN_MINOR_VERSION);
  env["rng"] = Rng::name;
  env["preprocessing"] = "none";
  env["centering"] = "per-channel mean removal";
  env["noise_model"] = "gaussian iid";
  env["warmup_runs"] = 1;
  env["threads"] = 1;
  return env;
}

inline nlohmann::json config_json(const SeparationConfig& c) {
  nlohmann::json j;
  j["n"] = c.n ? nlohmann::json(*c.n) : nlohmann::json("auto");
  j["lags"] = c.lags.empty() ? nlohmann::json("default") : nlohmann::json(c.lags);
  j["tol"] = c.tol > 0.0 ? nlohmann::json(c.tol) : nlohmann::json("1e-8/sqrt(n)");
  j["max_sweeps"] = c.max_sweeps;
  j["lag_choice"] = to_string(c.lag_choice);
  j["whitening"] = to_string(c.whitening);
  return j;
}

inline nlohmann::json diagnostics_json(const SeparationDiagnostics& d, Method method) {
  nlohmann::json j;
  j["final_off"] = d.final_off;
  if (method == Method::Givens) {
    j["sweeps"] = d.sweeps;
    j["rotations"] = d.rotations;
    j["converged"] = d.converged;
  } else {
    j["selected_lag_index"] = d.selected_lag;
    j["selected_lag"] = d.lags.empty() ? 0 : d.lags[d.selected_lag];
  }
  j["eigengap"] = d.eigengap;
  j["eigengap_flag"] = d.eigengap < 1e-6;
  j["n"] = d.n;
  j["sigma2"] = d.sigma2;
  j["num_lags"] = d.lags.size();
  j["max_asymmetry_removed"] = d.max_asymmetry;
  return j;
}

inline nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json j;
  j["input"] = {{"m", r.m}, {"T", r.T}, {"L", r.L}, {"n", r.n}, {"source", r.source}};
  j["repeats"] = r.repeats;
  for (const auto& t : r.methods) {
    nlohmann::json mj;
    mj["method"] = to_string(t.method);
    mj["wall_times_s"] = t.wall_times;
    mj["median_s"] = t.median;
    mj["best_s"] = t.best;
    mj["outputs_identical"] = t.outputs_identical;
    if (t.amari)
      mj["amari"] = *t.amari;
    if (!t.matched_corr.empty())
      mj["matched_corr"] = t.matched_corr;
    mj["diagnostics"] = diagnostics_json(t.diagnostics, t.method);
    j["methods"].push_back(std::move(mj));
  }
  j["speedup"] = r.speedup;
  j["config"] = config_json(r.config);
  j["env"] = environment_metadata();
  return j;
}

} // namespace sobi
