#pragma once

// Test-only EDF writer used to build small synthetic files.

#include <cstdint>
#include <string>
#include <vector>

namespace sobi::support {

struct EdfTestSignal {
  std::string label;
  double physical_min, physical_max;
  long digital_min, digital_max;
  int samples_per_record;
  std::vector<std::int16_t> samples; // all records concatenated
};

inline std::string edf_pad(const std::string& s, std::size_t width) {
  std::string out = s.substr(0, width);
  out.resize(width, ' ');
  return out;
}

inline std::string edf_num(double v, std::size_t width) {
  std::string s = std::to_string(v);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0')
      s.pop_back();
    if (s.back() == '.')
      s.pop_back();
  }
  return edf_pad(s, width);
}

inline std::string make_edf(const std::vector<EdfTestSignal>& sigs, int records, double duration,
                            const std::string& reserved = "", int declared_records = -2) {
  const auto ns = sigs.size();
  std::string h;
  h += edf_pad("0", 8) + edf_pad("X", 80) + edf_pad("X", 80) + edf_pad("01.01.20", 8) +
       edf_pad("00.00.00", 8) + edf_pad(std::to_string(256 * (ns + 1)), 8) + edf_pad(reserved, 44) +
       edf_pad(std::to_string(declared_records == -2 ? records : declared_records), 8) +
       edf_num(duration, 8) + edf_pad(std::to_string(ns), 4);
  for (const auto& s : sigs) h += edf_pad(s.label, 16);
  for (std::size_t i = 0; i < ns; ++i) h += edf_pad("", 80);
  for (std::size_t i = 0; i < ns; ++i) h += edf_pad("uV", 8);
  for (const auto& s : sigs) h += edf_num(s.physical_min, 8);
  for (const auto& s : sigs) h += edf_num(s.physical_max, 8);
  for (const auto& s : sigs) h += edf_num(double(s.digital_min), 8);
  for (const auto& s : sigs) h += edf_num(double(s.digital_max), 8);
  for (std::size_t i = 0; i < ns; ++i) h += edf_pad("", 80);
  for (const auto& s : sigs) h += edf_pad(std::to_string(s.samples_per_record), 8);
  for (std::size_t i = 0; i < ns; ++i) h += edf_pad("", 32);
  for (int r = 0; r < records; ++r)
    for (const auto& s : sigs)
      for (int j = 0; j < s.samples_per_record; ++j) {
        const auto v = static_cast<std::uint16_t>(s.samples[static_cast<std::size_t>(r * s.samples_per_record + j)]);
        h.push_back(static_cast<char>(v & 0xff));
        h.push_back(static_cast<char>(v >> 8));
      }
  return h;
}

} // namespace sobi::support
