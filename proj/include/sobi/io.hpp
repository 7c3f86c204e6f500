#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sobi/error.hpp"
#include "sobi/matrix.hpp"
#include "sobi/model.hpp"

namespace sobi::io {

enum class Format { Csv, Bin, Edf };

inline std::string to_string(Format f) {
  switch (f) {
  case Format::Csv:
    return "csv";
  case Format::Bin:
    return "bin";
  case Format::Edf:
    return "edf";
  }
  return "?";
}

inline Format parse_format(std::string_view s) {
  if (s == "csv")
    return Format::Csv;
  if (s == "bin" || s == "bss")
    return Format::Bin;
  if (s == "edf")
    return Format::Edf;
  throw InvalidArgument("unknown format '" + std::string(s) + "' (expected csv, bin or edf)");
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw FormatError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw FormatError("write failed for '" + path.string() + "'");
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
void put_le(std::string& buf, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const auto bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i)
    buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint16_t>>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    bits |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<T>(bits);
}

} // namespace detail

// ---------------------------------------------------------------------------
// CSV: one row per sample, one column per channel, optional header of labels.
// ---------------------------------------------------------------------------

inline Recording parse_csv(std::string_view text, std::string_view source = "<csv>") {
  std::vector<std::string_view> lines;
  for (auto line : detail::split(text, '\n')) {
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    lines.push_back(line);
  }
  while (!lines.empty() && detail::trim(lines.back()).empty())
    lines.pop_back();

  Recording rec;
  std::size_t first = 0;
  if (!lines.empty()) {
    const auto cells = detail::split(lines[0], ',');
    const bool numeric = std::all_of(cells.begin(), cells.end(),
                                     [](auto c) { return detail::parse_double(c).has_value(); });
    if (!numeric) {
      for (auto c : cells)
        rec.labels.emplace_back(detail::trim(c));
      first = 1;
    }
  }
  const std::size_t rows = lines.size() - first;
  if (rows < 2)
    throw FormatError(std::string(source) + ": need at least 2 data rows, found " +
                      std::to_string(rows));
  const std::size_t width = first ? rec.labels.size() : detail::split(lines[0], ',').size();

  rec.data.resize(static_cast<Index>(width), static_cast<Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto cells = detail::split(lines[first + r], ',');
    if (cells.size() != width)
      throw FormatError(std::string(source) + ": line " + std::to_string(first + r + 1) + " has " +
                        std::to_string(cells.size()) + " fields, expected " +
                        std::to_string(width));
    for (std::size_t c = 0; c < width; ++c) {
      const auto v = detail::parse_double(cells[c]);
      if (!v)
        throw FormatError(std::string(source) + ": line " + std::to_string(first + r + 1) +
                          ", field " + std::to_string(c + 1) + ": '" + std::string(cells[c]) +
                          "' is not a number");
      rec.data(static_cast<Index>(c), static_cast<Index>(r)) = *v;
    }
  }
  if (rec.labels.empty())
    rec.labels = default_labels(rec.channels());
  return rec;
}

inline Recording read_csv(const std::filesystem::path& path) {
  return parse_csv(detail::read_file(path), path.string());
}

inline std::string format_csv(const RealMatrix& data, const std::vector<std::string>& labels = {}) {
  std::string out;
  if (!labels.empty()) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (i)
        out.push_back(',');
      out += labels[i];
    }
    out.push_back('\n');
  }
  char buf[32];
  for (Index t = 0; t < data.cols(); ++t) {
    for (Index c = 0; c < data.rows(); ++c) {
      if (c)
        out.push_back(',');
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data(c, t), std::chars_format::general, 17);
      out.append(buf, ptr);
    }
    out.push_back('\n');
  }
  return out;
}

inline void write_csv(const Recording& rec, const std::filesystem::path& path) {
  detail::write_file(path, format_csv(rec.data, rec.labels));
}

// ---------------------------------------------------------------------------
// BSS1: "BSS1", u32 LE rows, u32 LE cols, rows*cols f64 LE in row-major order.
// ---------------------------------------------------------------------------

constexpr std::string_view kBinMagic = "BSS1";
constexpr std::size_t kBinHeaderBytes = 12;

inline std::string encode_bin(const RealMatrix& m) {
  if (m.rows() > 0xffffffffLL || m.cols() > 0xffffffffLL)
    throw InvalidArgument("matrix too large for BSS1");
  std::string buf;
  buf.reserve(kBinHeaderBytes + 8 * static_cast<std::size_t>(m.size()));
  buf += kBinMagic;
  detail::put_le(buf, static_cast<std::uint32_t>(m.rows()));
  detail::put_le(buf, static_cast<std::uint32_t>(m.cols()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c)
      detail::put_le(buf, m(r, c));
  return buf;
}

inline RealMatrix decode_bin(std::string_view bytes, std::string_view source = "<bin>") {
  if (bytes.size() < kBinHeaderBytes)
    throw FormatError(std::string(source) + ": truncated header (" + std::to_string(bytes.size()) +
                      " bytes)");
  if (bytes.substr(0, 4) != kBinMagic)
    throw FormatError(std::string(source) + ": bad magic, expected BSS1");
  const auto rows = detail::get_le<std::uint32_t>(bytes.data() + 4);
  const auto cols = detail::get_le<std::uint32_t>(bytes.data() + 8);
  if (rows == 0 || cols == 0)
    throw FormatError(std::string(source) + ": zero-sized matrix " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  const std::uint64_t expected = kBinHeaderBytes + 8ULL * rows * cols;
  if (bytes.size() != expected)
    throw FormatError(std::string(source) + ": payload size mismatch, expected " +
                      std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
  RealMatrix m(rows, cols);
  const char* p = bytes.data() + kBinHeaderBytes;
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c, p += 8)
      m(r, c) = detail::get_le<double>(p);
  return m;
}

inline void write_bin(const RealMatrix& m, const std::filesystem::path& path) {
  detail::write_file(path, encode_bin(m));
}

inline void write_bin(const Recording& rec, const std::filesystem::path& path) {
  write_bin(rec.data, path);
}

inline RealMatrix read_bin_matrix(const std::filesystem::path& path) {
  return decode_bin(detail::read_file(path), path.string());
}

inline Recording read_bin(const std::filesystem::path& path) {
  Recording rec;
  rec.data = read_bin_matrix(path);
  rec.labels = default_labels(rec.channels());
  return rec;
}

// ---------------------------------------------------------------------------
// EDF: plain continuous files, 16-bit samples.
// ---------------------------------------------------------------------------

struct EdfSignalHeader {
  std::string label;
  Index samples_per_record = 0;
  double physical_min = 0.0;
  double physical_max = 0.0;
  long digital_min = 0;
  long digital_max = 0;

  bool is_annotation() const { return label.starts_with("EDF Annotations"); }
  double gain() const {
    return (physical_max - physical_min) / static_cast<double>(digital_max - digital_min);
  }
  double to_physical(std::int16_t d) const {
    return physical_min + static_cast<double>(d - digital_min) * gain();
  }
};

struct EdfHeader {
  std::string version;
  Index num_records = 0;
  double record_duration = 0.0;
  std::vector<EdfSignalHeader> signals;
  std::string reserved;

  Index record_bytes() const {
    Index s = 0;
    for (const auto& sig : signals)
      s += 2 * sig.samples_per_record;
    return s;
  }
};

constexpr std::size_t kEdfFixedHeader = 256;
constexpr std::size_t kEdfSignalHeader = 256;

namespace detail {

inline std::string edf_field(std::string_view bytes, std::size_t offset, std::size_t len) {
  return std::string(trim(bytes.substr(offset, len)));
}

inline double edf_number(std::string_view bytes, std::size_t offset, std::size_t len,
                         const std::string& what) {
  const auto v = parse_double(bytes.substr(offset, len));
  if (!v)
    throw FormatError("EDF header: field '" + what + "' is not numeric: '" +
                      edf_field(bytes, offset, len) + "'");
  return *v;
}

} // namespace detail

inline EdfHeader parse_edf_header(std::string_view bytes) {
  if (bytes.size() < kEdfFixedHeader || bytes.substr(0, 8) != std::string_view("0       ", 8))
    throw FormatError("unsupported file: not an EDF file (version field must be '0')");
  EdfHeader h;
  h.version = "0";
  const auto header_bytes = static_cast<Index>(detail::edf_number(bytes, 184, 8, "header bytes"));
  h.reserved = detail::edf_field(bytes, 192, 44);
  if (h.reserved.starts_with("EDF+D"))
    throw FormatError("unsupported EDF feature: discontinuous EDF+D recordings");
  h.num_records = static_cast<Index>(detail::edf_number(bytes, 236, 8, "number of records"));
  h.record_duration = detail::edf_number(bytes, 244, 8, "record duration");
  const auto ns = static_cast<Index>(detail::edf_number(bytes, 252, 4, "number of signals"));
  if (ns < 1)
    throw FormatError("EDF header: number of signals must be >= 1");
  if (!(h.record_duration > 0.0))
    throw FormatError("EDF header: record duration must be positive");
  const auto expected_header = static_cast<Index>(kEdfFixedHeader + kEdfSignalHeader * ns);
  if (header_bytes != expected_header)
    throw FormatError("EDF header size mismatch: header declares " + std::to_string(header_bytes) +
                      " bytes, " + std::to_string(ns) + " signals need " +
                      std::to_string(expected_header));
  if (bytes.size() < static_cast<std::size_t>(expected_header))
    throw FormatError("EDF header truncated: expected " + std::to_string(expected_header) +
                      " bytes, file has " + std::to_string(bytes.size()));

  const auto n = static_cast<std::size_t>(ns);
  const std::size_t base = kEdfFixedHeader;
  // Per-signal fields are stored field-major: all labels, then all transducers, ...
  auto at = [&](std::size_t field_offset, std::size_t width, std::size_t i) {
    return base + field_offset * n + width * i;
  };
  h.signals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = h.signals[i];
    s.label = detail::edf_field(bytes, at(0, 16, i), 16);
    s.physical_min = detail::edf_number(bytes, at(104, 8, i), 8, "physical minimum");
    s.physical_max = detail::edf_number(bytes, at(112, 8, i), 8, "physical maximum");
    s.digital_min = static_cast<long>(detail::edf_number(bytes, at(120, 8, i), 8, "digital minimum"));
    s.digital_max = static_cast<long>(detail::edf_number(bytes, at(128, 8, i), 8, "digital maximum"));
    s.samples_per_record =
        static_cast<Index>(detail::edf_number(bytes, at(216, 8, i), 8, "samples per record"));
    if (s.is_annotation())
      continue;
    if (s.digital_max <= s.digital_min)
      throw FormatError("EDF signal '" + s.label + "': digital maximum must exceed digital minimum");
    if (s.physical_max == s.physical_min)
      throw FormatError("EDF signal '" + s.label + "': physical range is empty");
    if (s.samples_per_record < 1)
      throw FormatError("EDF signal '" + s.label + "': samples per record must be >= 1");
  }
  return h;
}

/// Reads the selected (default: all non-annotation) signals of a continuous EDF file.
inline Recording parse_edf(std::string_view bytes, const std::vector<std::string>& channel_filter = {}) {
  EdfHeader h = parse_edf_header(bytes);
  const std::size_t header_size = kEdfFixedHeader + kEdfSignalHeader * h.signals.size();
  const auto record_bytes = static_cast<std::size_t>(h.record_bytes());
  const std::size_t payload = bytes.size() - header_size;
  if (h.num_records == -1 && record_bytes > 0 && payload % record_bytes == 0)
    h.num_records = static_cast<Index>(payload / record_bytes);
  if (h.num_records < 1)
    throw FormatError("EDF header: number of records must be >= 1");
  const std::size_t expected = record_bytes * static_cast<std::size_t>(h.num_records);
  if (payload != expected)
    throw FormatError("EDF header/payload size mismatch: expected " + std::to_string(expected) +
                      " data bytes, file has " + std::to_string(payload));

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < h.signals.size(); ++i) {
    const auto& s = h.signals[i];
    if (s.is_annotation())
      continue;
    if (channel_filter.empty() ||
        std::find(channel_filter.begin(), channel_filter.end(), s.label) != channel_filter.end())
      keep.push_back(i);
  }
  for (const auto& want : channel_filter) {
    const bool found = std::any_of(keep.begin(), keep.end(),
                                   [&](std::size_t i) { return h.signals[i].label == want; });
    if (!found)
      throw InvalidArgument("EDF: no signal labelled '" + want + "'");
  }
  if (keep.empty())
    throw FormatError("EDF: no data signals to read");
  const Index spr = h.signals[keep.front()].samples_per_record;
  for (std::size_t i : keep)
    if (h.signals[i].samples_per_record != spr)
      throw FormatError("EDF: mixed sampling rates among retained channels ('" +
                        h.signals[keep.front()].label + "' has " + std::to_string(spr) +
                        " samples per record, '" + h.signals[i].label + "' has " +
                        std::to_string(h.signals[i].samples_per_record) + ")");

  std::vector<std::size_t> offset_in_record(h.signals.size(), 0);
  for (std::size_t i = 1; i < h.signals.size(); ++i)
    offset_in_record[i] = offset_in_record[i - 1] + 2 * static_cast<std::size_t>(h.signals[i - 1].samples_per_record);

  Recording rec;
  rec.sample_rate = static_cast<double>(spr) / h.record_duration;
  rec.data.resize(static_cast<Index>(keep.size()), spr * h.num_records);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const auto& sig = h.signals[keep[k]];
    rec.labels.push_back(sig.label);
    for (Index r = 0; r < h.num_records; ++r) {
      const char* p = bytes.data() + header_size + static_cast<std::size_t>(r) * record_bytes +
                      offset_in_record[keep[k]];
      for (Index j = 0; j < spr; ++j, p += 2)
        rec.data(static_cast<Index>(k), r * spr + j) = sig.to_physical(detail::get_le<std::int16_t>(p));
    }
  }
  return rec;
}

inline Recording read_edf(const std::filesystem::path& path, const std::vector<std::string>& channel_filter = {}) {
  return parse_edf(detail::read_file(path), channel_filter);
}

// ---------------------------------------------------------------------------
// Format dispatch.
// ---------------------------------------------------------------------------

/// Magic bytes first ("BSS1", EDF version "0       "), then the extension.
inline Format sniff_format(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw FormatError("cannot open '" + path.string() + "'");
  char head[8] = {};
  in.read(head, sizeof head);
  const std::string_view h(head, static_cast<std::size_t>(in.gcount()));
  if (h.starts_with(kBinMagic))
    return Format::Bin;
  if (h == std::string_view("0       ", 8))
    return Format::Edf;
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".csv" || ext == ".txt")
    return Format::Csv;
  if (ext == ".bss" || ext == ".bin")
    return Format::Bin;
  if (ext == ".edf")
    return Format::Edf;
  throw FormatError("cannot determine format of '" + path.string() + "'; pass an explicit format");
}

inline Recording read_recording(const std::filesystem::path& path, std::optional<Format> format = {},
                                const std::vector<std::string>& channel_filter = {}) {
  switch (format ? *format : sniff_format(path)) {
  case Format::Csv:
    return read_csv(path);
  case Format::Bin:
    return read_bin(path);
  case Format::Edf:
    return read_edf(path, channel_filter);
  }
  throw FormatError("unreachable format");
}

/// Plain matrix (not a recording): CSV rows are matrix rows.
inline RealMatrix read_matrix(const std::filesystem::path& path, std::optional<Format> format = {}) {
  switch (format ? *format : sniff_format(path)) {
  case Format::Bin:
    return read_bin_matrix(path);
  case Format::Csv:
    return parse_csv(detail::read_file(path), path.string()).data.transpose();
  case Format::Edf:
    return read_edf(path).data;
  }
  throw FormatError("unreachable format");
}

inline void write_matrix(const RealMatrix& m, const std::filesystem::path& path, Format format) {
  switch (format) {
  case Format::Bin:
    write_bin(m, path);
    return;
  case Format::Csv:
    detail::write_file(path, format_csv(m.transpose()));
    return;
  case Format::Edf:
    throw InvalidArgument("writing EDF is not supported");
  }
}

} // namespace sobi::io
