#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "twophoton/stack.hpp"
#include "twophoton/types.hpp"

namespace twophoton {

// Sidecar header describing the raw binary payload of a stack.
struct StackHeader {
  Index channels = 0;
  Index frames = 0;
  Index rows = 0;
  Index cols = 0;
  std::string dtype = "f32le";
  double frame_period_s = kFramePeriodSeconds;
};

// Matrices exported as images or tables; plain dense doubles.
using ExportMatrix = MapMatrix;

// Stack persistence: `<name>.json` header plus `<name>.bin` holding raw
// little-endian 32-bit floats in [channel][time][row][col] order. The
// round-trip is bit-exact.
ImageStack load_stack(const std::string& header_path);
void save_stack(const ImageStack& stack, const std::string& header_path);

// `time_s,value` CSV, rows sorted by time. The sample rate is inferred from
// the median inter-sample spacing.
BioSignal load_biosignal(const std::string& csv_path);

// Single-column `trial_start_s` CSV, strictly increasing.
StimSchedule load_schedule(const std::string& csv_path);

// 16-bit binary PGM (P5, maxval 65535), min-max scaled; a constant matrix
// maps to all-zero.
void export_pgm(const ExportMatrix& m, const std::string& path);

// One header line then one row per element, >= 9 significant digits.
void export_csv_series(const std::vector<double>& series,
                       const std::string& path,
                       const std::string& header = "value");
void export_csv_pairs(const std::vector<std::pair<double, double>>& pairs,
                      const std::string& path,
                      const std::string& header = "x,y");

// Shortest decimal form carrying 9 significant digits.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

} // namespace twophoton
