#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sobi/evaluate.hpp"
#include "sobi/io.hpp"
#include "sobi/model.hpp"

namespace sobi::cli {

/// Flags of one invocation; unused fields keep their defaults.
struct RunConfig {
  std::string subcommand;
  std::string input, output, report;
  std::string format, out_format = "bin";
  std::string method = "schur";
  Index channels = 0, sources = 0, samples = 0;
  std::optional<Index> n;
  double sigma = 0.0;
  double sample_rate = 160.0;
  std::uint64_t seed = 1;
  std::string lags;
  double tol = 0.0;
  Index max_sweeps = 100;
  std::string lag_choice = "first";
  std::string whitening = "eigen";
  Index repeats = 5;
  std::vector<double> ar1, sinusoids;
  bool nonorthogonal = false;
  std::vector<std::string> channel_filter;
  std::string estimated, truth, demixing, mixing;
  std::string truth_mixing, truth_sources;
};

/// "1..L", "a..b" or "a,b,c".
inline std::vector<Index> parse_lags(const std::string& spec) {
  std::vector<Index> out;
  auto to_index = [&](const std::string& s) -> Index {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size())
      throw InvalidArgument("bad lag '" + s + "' in '" + spec + "'");
    return static_cast<Index>(v);
  };
  const auto dots = spec.find("..");
  if (dots != std::string::npos) {
    const Index a = to_index(spec.substr(0, dots));
    const Index b = to_index(spec.substr(dots + 2));
    if (b < a)
      throw InvalidArgument("empty lag range '" + spec + "'");
    for (Index k = a; k <= b; ++k)
      out.push_back(k);
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ','))
    out.push_back(to_index(item));
  return out;
}

inline SeparationConfig separation_config(const RunConfig& rc) {
  SeparationConfig c;
  c.n = rc.n;
  if (!rc.lags.empty())
    c.lags = parse_lags(rc.lags);
  c.tol = rc.tol;
  c.max_sweeps = rc.max_sweeps;
  c.lag_choice = parse_lag_choice(rc.lag_choice);
  c.whitening = parse_whitening(rc.whitening);
  return c;
}

inline std::string extension(io::Format f) { return f == io::Format::Csv ? ".csv" : ".bss"; }

inline std::optional<io::Format> explicit_format(const std::string& s) {
  if (s.empty())
    return std::nullopt;
  return io::parse_format(s);
}

inline SourceSpec source_spec(const RunConfig& rc) {
  if (rc.ar1.empty() && rc.sinusoids.empty())
    return default_source_spec(rc.sources, rc.sample_rate);
  SourceSpec spec;
  spec.sample_rate = rc.sample_rate;
  for (double phi : rc.ar1)
    spec.sources.emplace_back(Ar1{phi});
  for (double f : rc.sinusoids)
    spec.sources.emplace_back(Sinusoid{f});
  if (rc.sources != 0 && spec.size() != rc.sources)
    throw InvalidArgument("--sources " + std::to_string(rc.sources) + " disagrees with " +
                          std::to_string(spec.size()) + " listed sources");
  return spec;
}

inline GroundTruth synthetic_truth(const RunConfig& rc) {
  if (rc.channels < 1 || rc.samples < 1)
    throw InvalidArgument("--channels and --samples are required");
  RunConfig copy = rc;
  if (copy.sources == 0 && copy.ar1.empty() && copy.sinusoids.empty())
    copy.sources = copy.channels;
  const SourceSpec spec = source_spec(copy);
  if (spec.size() > rc.channels)
    throw InvalidArgument("need channels >= sources for a full-column-rank mixing (got " +
                          std::to_string(rc.channels) + " channels, " +
                          std::to_string(spec.size()) + " sources)");
  return make_ground_truth(spec, rc.channels, rc.samples, rc.sigma, rc.seed, !rc.nonorthogonal);
}

inline void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw FormatError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline int cmd_gen(const RunConfig& rc, std::ostream& out) {
  if (rc.output.empty())
    throw InvalidArgument("--out is required");
  const io::Format fmt = io::parse_format(rc.out_format);
  if (fmt == io::Format::Edf)
    throw InvalidArgument("gen writes bin or csv");
  GroundTruth truth = synthetic_truth(rc);
  Recording rec = mix(truth);
  rec.sample_rate = rc.sample_rate;
  const std::string ext = extension(fmt);
  const std::string rec_path = rc.output + ext;
  const std::string mix_path = rc.output + "_mixing" + ext;
  const std::string src_path = rc.output + "_sources" + ext;
  if (fmt == io::Format::Csv) {
    io::write_csv(rec, rec_path);
    io::write_matrix(truth.mixing, mix_path, fmt);
    io::write_csv(Recording{truth.sources, rc.sample_rate, default_labels(truth.sources.rows())},
                  src_path);
  } else {
    io::write_bin(rec.data, rec_path);
    io::write_bin(truth.mixing, mix_path);
    io::write_bin(truth.sources, src_path);
  }
  out << "gen recording=" << rec_path << " (" << shape_string(rec.data) << ") mixing=" << mix_path
      << " (" << shape_string(truth.mixing) << ") sources=" << src_path << " ("
      << shape_string(truth.sources) << ") seed=" << rc.seed << " sigma=" << rc.sigma << '\n';
  return 0;
}

inline int cmd_separate(const RunConfig& rc, std::ostream& out) {
  if (rc.input.empty() || rc.output.empty())
    throw InvalidArgument("--input and --out are required");
  const Method method = parse_method(rc.method);
  const io::Format fmt = io::parse_format(rc.out_format);
  const Recording rec = io::read_recording(rc.input, explicit_format(rc.format), rc.channel_filter);
  SeparationConfig config = separation_config(rc);
  SeparationResult res;
  try {
    res = separate(rec, method, config);
  } catch (const DegenerateSpectrumError& e) {
    std::string msg = e.what();
    if (method == Method::Schur && config.lag_choice == LagChoice::First)
      msg += " (rerun with --lag-choice best-gap)";
    throw DegenerateSpectrumError(msg);
  }

  const std::string ext = extension(fmt);
  if (fmt == io::Format::Csv)
    io::write_csv(Recording{res.sources_hat, rec.sample_rate, default_labels(res.sources_hat.rows())},
                  rc.output + "_sources" + ext);
  else
    io::write_bin(res.sources_hat, rc.output + "_sources" + ext);
  io::write_matrix(res.mixing_hat, rc.output + "_mixing" + ext, fmt);
  io::write_matrix(res.U, rc.output + "_unmixing" + ext, fmt);
  io::write_matrix(res.W, rc.output + "_whitening" + ext, fmt);
  io::write_matrix(res.demixing(), rc.output + "_demixing" + ext, fmt);

  nlohmann::json report;
  report["method"] = to_string(method);
  report["input"] = {{"path", rc.input}, {"m", rec.channels()}, {"T", rec.samples()},
                     {"sample_rate", rec.sample_rate}};
  report["wall_time_s"] = res.wall_time;
  report["config"] = config_json(config);
  report["diagnostics"] = diagnostics_json(res.diagnostics, method);
  report["env"] = environment_metadata();
  write_json(report, rc.report.empty() ? rc.output + "_report.json" : rc.report);

  out << "method=" << to_string(method) << " n=" << res.diagnostics.n << " wall_time_s=" << std::setprecision(6)
      << res.wall_time << " final_off=" << res.diagnostics.final_off << '\n';
  return 0;
}

inline int cmd_bench(const RunConfig& rc, std::ostream& out) {
  if (rc.repeats < 3)
    throw InvalidArgument("--repeats must be >= 3, got " + std::to_string(rc.repeats));
  Recording rec;
  std::optional<GroundTruth> truth;
  std::string source;
  if (!rc.input.empty()) {
    rec = io::read_recording(rc.input, explicit_format(rc.format), rc.channel_filter);
    source = rc.input;
    if (!rc.truth_mixing.empty() || !rc.truth_sources.empty()) {
      truth.emplace();
      if (!rc.truth_mixing.empty())
        truth->mixing = io::read_matrix(rc.truth_mixing);
      if (!rc.truth_sources.empty())
        truth->sources = io::read_recording(rc.truth_sources).data;
    }
  } else {
    truth = synthetic_truth(rc);
    rec = mix(*truth);
    rec.sample_rate = rc.sample_rate;
    source = "synthetic seed=" + std::to_string(rc.seed);
  }
  const BenchReport report = bench(rec, separation_config(rc), rc.repeats, truth ? &*truth : nullptr,
                                   {Method::Givens, Method::Schur}, source);
  const auto j = to_json(report);
  if (!rc.report.empty())
    write_json(j, rc.report);

  const auto& g = report.methods[0];
  const auto& s = report.methods[1];
  out << std::left << std::setw(8) << "method" << std::right << std::setw(12) << "median_s"
      << std::setw(18) << "time_reduction_s" << std::setw(10) << "speedup" << '\n';
  out << std::fixed << std::setprecision(4);
  out << std::left << std::setw(8) << "schur" << std::right << std::setw(12) << s.median
      << std::setw(18) << (g.median - s.median) << std::setw(10) << report.speedup << '\n';
  out << std::left << std::setw(8) << "givens" << std::right << std::setw(12) << g.median
      << std::setw(18) << 0.0 << std::setw(10) << 1.0 << '\n';
  out << std::defaultfloat;
  if (g.amari && s.amari)
    out << "amari givens=" << *g.amari << " schur=" << *s.amari << '\n';
  return 0;
}

inline int cmd_eval(const RunConfig& rc, std::ostream& out) {
  nlohmann::json report;
  bool any = false;
  if (!rc.estimated.empty() || !rc.truth.empty()) {
    if (rc.estimated.empty() || rc.truth.empty())
      throw InvalidArgument("--estimated and --truth go together");
    const RealMatrix est = io::read_recording(rc.estimated).data;
    const RealMatrix tru = io::read_recording(rc.truth).data;
    if (est.rows() != tru.rows() || est.cols() != tru.cols())
      throw InvalidArgument("shape mismatch: estimated sources are " + shape_string(est) +
                            ", true sources are " + shape_string(tru));
    const MatchResult match = matched_correlation(tru, est);
    report["matched_corr"] = match.abs_corr;
    report["assignment"] = match.assignment;
    out << "matched_corr";
    for (double c : match.abs_corr)
      out << ' ' << std::setprecision(6) << c;
    out << '\n';
    any = true;
  }
  if (!rc.demixing.empty() || !rc.mixing.empty()) {
    if (rc.demixing.empty() || rc.mixing.empty())
      throw InvalidArgument("--demixing and --mixing go together");
    const RealMatrix d = io::read_matrix(rc.demixing);
    const RealMatrix a = io::read_matrix(rc.mixing);
    if (d.cols() != a.rows() || d.rows() != a.cols())
      throw InvalidArgument("shape mismatch: demixing is " + shape_string(d) + ", mixing is " +
                            shape_string(a));
    const double amari = amari_index(d * a);
    report["amari"] = amari;
    out << "amari " << std::setprecision(6) << amari << '\n';
    any = true;
  }
  if (!any)
    throw InvalidArgument("eval needs --estimated/--truth and/or --demixing/--mixing");
  if (!rc.report.empty())
    write_json(report, rc.report);
  return 0;
}

/// Runs one command; data to files, summary to `out`, errors to `err`.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Second-order blind source separation: Givens (Jacobi) vs Schur unmixing"};
  app.require_subcommand(1);
  RunConfig rc;

  auto add_sep_flags = [&](CLI::App* sub) {
    sub->add_option("--n,--sources", rc.n, "Retained source count (default: largest eigengap)");
    sub->add_option("--lags", rc.lags, "Lag set: 1..L or a,b,c (default 1..min(100, T/3))");
    sub->add_option("--tol", rc.tol, "Jacobi rotation threshold (default 1e-8/sqrt(n))");
    sub->add_option("--max-sweeps", rc.max_sweeps, "Jacobi sweep budget")->capture_default_str();
    sub->add_option("--lag-choice", rc.lag_choice, "Schur lag policy: first | best-gap")->capture_default_str();
    sub->add_option("--whitening", rc.whitening, "eigen | svd")->capture_default_str();
    sub->add_option("--format", rc.format, "Input format override: csv | bin | edf");
    sub->add_option("--channel", rc.channel_filter, "EDF channel label to keep (repeatable)");
  };
  auto add_gen_flags = [&](CLI::App* sub, bool sources_flag) {
    sub->add_option("--channels", rc.channels, "Channels m");
    if (sources_flag)
      sub->add_option("--sources", rc.sources, "Sources n (default m)");
    sub->add_option("--samples", rc.samples, "Samples T");
    sub->add_option("--seed", rc.seed, "Seed")->capture_default_str();
    sub->add_option("--sigma", rc.sigma, "Noise standard deviation")->capture_default_str();
    sub->add_option("--sample-rate", rc.sample_rate, "Hz")->capture_default_str();
    sub->add_option("--ar1", rc.ar1, "AR(1) coefficients, one source each")->delimiter(',');
    sub->add_option("--sinusoids", rc.sinusoids, "Sinusoid frequencies in Hz")->delimiter(',');
    sub->add_flag("--nonorthogonal", rc.nonorthogonal, "Gaussian instead of orthogonal mixing");
  };

  auto* gen = app.add_subcommand("gen", "Write a synthetic mixture plus its ground truth");
  add_gen_flags(gen, true);
  gen->add_option("--out", rc.output, "Output prefix")->required();
  gen->add_option("--out-format", rc.out_format, "bin | csv")->capture_default_str();

  auto* sep = app.add_subcommand("separate", "Separate a recording");
  sep->add_option("--input", rc.input, "Recording (csv, bin or edf)")->required();
  sep->add_option("--method", rc.method, "givens | schur")->capture_default_str();
  sep->add_option("--out", rc.output, "Output prefix")->required();
  sep->add_option("--out-format", rc.out_format, "bin | csv")->capture_default_str();
  sep->add_option("--report", rc.report, "Report path (default <out>_report.json)");
  add_sep_flags(sep);

  auto* bch = app.add_subcommand("bench", "Time Givens against Schur");
  bch->add_option("--input", rc.input, "Recording; synthetic when absent");
  bch->add_option("--repeats", rc.repeats, "Timed runs per method (>= 3)")->capture_default_str();
  bch->add_option("--report", rc.report, "Report path");
  bch->add_option("--truth-mixing", rc.truth_mixing, "True mixing for amari");
  bch->add_option("--truth-sources", rc.truth_sources, "True sources for matched correlation");
  add_sep_flags(bch);
  bch->add_option("--channels", rc.channels, "Synthetic channels m");
  bch->add_option("--samples", rc.samples, "Synthetic samples T");
  bch->add_option("--seed", rc.seed, "Synthetic seed")->capture_default_str();
  bch->add_option("--sigma", rc.sigma, "Synthetic noise")->capture_default_str();
  bch->add_option("--sample-rate", rc.sample_rate, "Synthetic sample rate")->capture_default_str();

  auto* evl = app.add_subcommand("eval", "Score estimated sources or demixing against ground truth");
  evl->add_option("--estimated", rc.estimated, "Estimated sources");
  evl->add_option("--truth", rc.truth, "True sources");
  evl->add_option("--demixing", rc.demixing, "Estimated demixing U^T W");
  evl->add_option("--mixing", rc.mixing, "True mixing");
  evl->add_option("--report", rc.report, "Report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen) {
      rc.subcommand = "gen";
      return cmd_gen(rc, out);
    }
    if (*sep) {
      rc.subcommand = "separate";
      return cmd_separate(rc, out);
    }
    if (*bch) {
      rc.subcommand = "bench";
      if (rc.n && rc.input.empty())
        rc.sources = *rc.n;
      return cmd_bench(rc, out);
    }
    rc.subcommand = "eval";
    return cmd_eval(rc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

} // namespace sobi::cli
