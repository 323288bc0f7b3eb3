#include "twophoton/stack_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "twophoton/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "stack payloads are little-endian; big-endian hosts need a swap");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

namespace twophoton {

namespace {

std::string payload_path(const std::string& header_path) {
  std::filesystem::path p(header_path);
  p.replace_extension(".bin");
  return p.string();
}

double parse_double(const std::string& field, const std::string& where) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError("non-numeric cell '" + field + "' in " + where);
  return value;
}

// Splits a CSV line; tolerates a trailing CR.
std::vector<std::string> split_csv(std::string line) {
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

} // namespace

ImageStack load_stack(const std::string& header_path) {
  std::ifstream header_file(header_path, std::ios::binary);
  if (!header_file)
    throw IoError("cannot open: " + header_path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header_file);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed stack header " + header_path + ": " + e.what());
  }

  StackHeader h;
  try {
    h.channels = j.at("channels").get<Index>();
    h.frames = j.at("frames").get<Index>();
    h.rows = j.at("rows").get<Index>();
    h.cols = j.at("cols").get<Index>();
    h.dtype = j.at("dtype").get<std::string>();
    h.frame_period_s = j.at("frame_period_s").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad stack header field in " + header_path + ": " +
                     e.what());
  }
  if (h.channels < 1 || h.frames < 1 || h.rows < 1 || h.cols < 1)
    throw FormatError("stack header counts must all be >= 1 in " + header_path);
  if (h.dtype != "f32le")
    throw FormatError("unsupported dtype '" + h.dtype + "' in " + header_path);
  if (!(h.frame_period_s > 0.0))
    throw FormatError("frame_period_s must be > 0 in " + header_path);

  const std::string bin_path = payload_path(header_path);
  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin)
    throw IoError("cannot open: " + bin_path);
  const auto actual_bytes = static_cast<std::uint64_t>(bin.tellg());
  const std::uint64_t expected_values =
      static_cast<std::uint64_t>(h.channels) * h.frames * h.rows * h.cols;
  if (actual_bytes != expected_values * 4)
    throw SizeMismatchError(bin_path + " holds " +
                            std::to_string(actual_bytes) + " bytes, header " +
                            "requires " + std::to_string(expected_values * 4));

  ImageStack stack;
  stack.channels = h.channels;
  stack.frames = h.frames;
  stack.rows = h.rows;
  stack.cols = h.cols;
  stack.frame_period_s = h.frame_period_s;
  stack.data.resize(expected_values);
  bin.seekg(0);
  bin.read(reinterpret_cast<char*>(stack.data.data()),
           static_cast<std::streamsize>(expected_values * 4));
  if (!bin)
    throw IoError("read failed: " + bin_path);
  for (float v : stack.data)
    if (!std::isfinite(v))
      throw DataIntegrityError("non-finite intensity in " + bin_path);
  return stack;
}

void save_stack(const ImageStack& stack, const std::string& header_path) {
  stack.validate();
  nlohmann::json j{{"channels", stack.channels}, {"frames", stack.frames},
                   {"rows", stack.rows},         {"cols", stack.cols},
                   {"dtype", "f32le"},           {"frame_period_s", stack.frame_period_s}};
  std::ofstream header(header_path, std::ios::binary);
  if (!header)
    throw IoError("cannot open for writing: " + header_path);
  header << j.dump(2) << '\n';
  if (!header.flush())
    throw IoError("write failed: " + header_path);

  const std::string bin_path = payload_path(header_path);
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin)
    throw IoError("cannot open for writing: " + bin_path);
  bin.write(reinterpret_cast<const char*>(stack.data.data()),
            static_cast<std::streamsize>(stack.data.size() * 4));
  if (!bin.flush())
    throw IoError("write failed: " + bin_path);
}

BioSignal load_biosignal(const std::string& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in)
    throw IoError("cannot open: " + csv_path);
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("empty biosignal csv: " + csv_path);
  {
    auto header = split_csv(line);
    if (header.size() != 2 || header[0] != "time_s" || header[1] != "value")
      throw FormatError("expected 'time_s,value' header in " + csv_path);
  }

  std::vector<double> times;
  BioSignal signal;
  while (std::getline(in, line)) {
    auto fields = split_csv(line);
    if (fields.size() == 1 && fields[0].empty())
      continue;
    if (fields.size() != 2)
      throw FormatError("expected 2 cells per row in " + csv_path);
    const double t = parse_double(fields[0], csv_path);
    if (!times.empty() && t <= times.back())
      throw FormatError("times not strictly increasing in " + csv_path);
    times.push_back(t);
    signal.samples.push_back(parse_double(fields[1], csv_path));
  }
  if (times.size() < 2)
    throw FormatError("need at least 2 samples to infer the rate in " +
                      csv_path);

  std::vector<double> gaps(times.size() - 1);
  for (std::size_t i = 0; i + 1 < times.size(); ++i)
    gaps[i] = times[i + 1] - times[i];
  std::sort(gaps.begin(), gaps.end());
  const std::size_t n = gaps.size();
  const double median =
      n % 2 == 1 ? gaps[n / 2] : 0.5 * (gaps[n / 2 - 1] + gaps[n / 2]);
  if (!(median > 0.0))
    throw FormatError("degenerate sample spacing in " + csv_path);
  signal.sample_rate_hz = 1.0 / median;
  signal.label = std::filesystem::path(csv_path).stem().string();
  return signal;
}

StimSchedule load_schedule(const std::string& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in)
    throw IoError("cannot open: " + csv_path);
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("empty schedule csv: " + csv_path);
  {
    auto header = split_csv(line);
    if (header.size() != 1 || header[0] != "trial_start_s")
      throw FormatError("expected 'trial_start_s' header in " + csv_path);
  }
  StimSchedule sched;
  while (std::getline(in, line)) {
    auto fields = split_csv(line);
    if (fields.size() == 1 && fields[0].empty())
      continue;
    if (fields.size() != 1)
      throw FormatError("expected 1 cell per row in " + csv_path);
    const double start = parse_double(fields[0], csv_path);
    if (!sched.trial_starts_s.empty() && start <= sched.trial_starts_s.back())
      throw FormatError("trial starts not strictly increasing in " + csv_path);
    sched.trial_starts_s.push_back(start);
  }
  return sched;
}

void export_pgm(const ExportMatrix& m, const std::string& path) {
  const Index rows = m.rows(), cols = m.cols();
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("export_pgm: empty matrix");
  double lo = m(0, 0), hi = m(0, 0);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const double v = m(r, c);
      if (!std::isfinite(v))
        throw std::invalid_argument("export_pgm: non-finite value");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  const double range = hi - lo;

  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open for writing: " + path);
  out << "P5\n" << cols << ' ' << rows << "\n65535\n";
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      std::uint16_t sample = 0;
      if (range > 0.0)
        sample = static_cast<std::uint16_t>(
            std::lround((m(r, c) - lo) / range * 65535.0));
      // PGM 16-bit samples are big-endian
      const char bytes[2] = {static_cast<char>(sample >> 8),
                             static_cast<char>(sample & 0xff)};
      out.write(bytes, 2);
    }
  }
  if (!out.flush())
    throw IoError("write failed: " + path);
}

void export_csv_series(const std::vector<double>& series,
                       const std::string& path, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open for writing: " + path);
  out << header << '\n';
  for (double v : series)
    out << format_number(v) << '\n';
  if (!out.flush())
    throw IoError("write failed: " + path);
}

void export_csv_pairs(const std::vector<std::pair<double, double>>& pairs,
                      const std::string& path, const std::string& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open for writing: " + path);
  out << header << '\n';
  for (const auto& [x, y] : pairs)
    out << format_number(x) << ',' << format_number(y) << '\n';
  if (!out.flush())
    throw IoError("write failed: " + path);
}

} // namespace twophoton
