#include "twophoton/intensity.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "twophoton/errors.hpp"

namespace twophoton {

std::vector<double> frame_means(const ChannelView& ch) {
  const Index T = ch.frames();
  const double pixels = static_cast<double>(ch.rows() * ch.cols());
  std::vector<double> means(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t)
    means[static_cast<std::size_t>(t)] =
        ch.frame(t).cast<double>().sum() / pixels;
  return means;
}

namespace {

PixelStats stats_impl(const ChannelView& ch, const MaskMatrix* valid) {
  const Index T = ch.frames();
  if (T < 2)
    throw InsufficientFramesError("pixel_stats needs at least 2 frames");
  const Index rows = ch.rows(), cols = ch.cols();
  if (valid && (valid->rows() != rows || valid->cols() != cols))
    throw std::invalid_argument("pixel_stats: mask dimension mismatch");

  PixelStats ps;
  ps.frames_used = T;
  ps.mean_map = MapMatrix::Zero(rows, cols);
  for (Index t = 0; t < T; ++t)
    ps.mean_map += ch.frame(t).cast<double>();
  ps.mean_map /= static_cast<double>(T);

  ps.var_map = MapMatrix::Zero(rows, cols);
  for (Index t = 0; t < T; ++t) {
    const MapMatrix diff = ch.frame(t).cast<double>() - ps.mean_map;
    ps.var_map += diff.cwiseProduct(diff);
  }
  ps.var_map /= static_cast<double>(T - 1);

  if (valid) {
    const MapMatrix keep = valid->cast<double>().matrix();
    ps.mean_map = ps.mean_map.cwiseProduct(keep);
    ps.var_map = ps.var_map.cwiseProduct(keep);
  }
  return ps;
}

} // namespace

PixelStats pixel_stats(const ChannelView& ch) { return stats_impl(ch, nullptr); }

PixelStats pixel_stats(const ChannelView& ch, const MaskMatrix& valid) {
  return stats_impl(ch, &valid);
}

double total_variance(const PixelStats& ps) { return ps.var_map.sum(); }

double variance_reduction_pct(double before, double after) {
  if (!(before > 0.0))
    throw std::invalid_argument("variance_reduction_pct: before must be > 0");
  return 100.0 * (before - after) / before;
}

std::pair<ImageStack, EqualizationReport> mean_equalize(const ChannelView& ch) {
  const Index T = ch.frames();
  EqualizationReport report;
  report.frame_means_before = frame_means(ch);
  for (double m : report.frame_means_before)
    if (!(m > 0.0))
      throw DegenerateFrameError("mean_equalize: frame mean must be > 0");

  double standard = 0.0;
  for (double m : report.frame_means_before)
    standard += m;
  standard /= static_cast<double>(T);
  report.standard = standard;

  ImageStack equalized = ImageStack::zeros(1, T, ch.rows(), ch.cols(),
                                           ch.frame_period_s());
  for (Index t = 0; t < T; ++t) {
    const double scale =
        standard / report.frame_means_before[static_cast<std::size_t>(t)];
    equalized.frame(0, t) =
        (ch.frame(t).cast<double>() * scale).cast<float>();
  }
  report.frame_means_after = frame_means(equalized.channel(0));

  if (T >= 2) {
    report.total_var_before = total_variance(pixel_stats(ch));
    report.total_var_after = total_variance(pixel_stats(equalized.channel(0)));
  }
  report.reduction_pct =
      report.total_var_before > 0.0
          ? variance_reduction_pct(report.total_var_before,
                                   report.total_var_after)
          : 0.0;
  return {std::move(equalized), std::move(report)};
}

std::vector<std::pair<double, double>>
mean_variance_scatter(const PixelStats& ps, double epsilon) {
  if (!(epsilon > 0.0))
    throw std::invalid_argument("mean_variance_scatter: epsilon must be > 0");
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(static_cast<std::size_t>(ps.mean_map.size()));
  for (Index r = 0; r < ps.mean_map.rows(); ++r)
    for (Index c = 0; c < ps.mean_map.cols(); ++c)
      pairs.emplace_back(std::log(ps.mean_map(r, c) + epsilon),
                         std::log(ps.var_map(r, c) + epsilon));
  return pairs;
}

MapMatrix difference_map(const MapMatrix& mean_a, const MapMatrix& mean_b) {
  if (mean_a.rows() != mean_b.rows() || mean_a.cols() != mean_b.cols())
    throw std::invalid_argument("difference_map: dimension mismatch");
  return mean_a - mean_b;
}

std::string to_json_string(const EqualizationReport& report) {
  nlohmann::json j{{"standard", report.standard},
                   {"frame_means_before", report.frame_means_before},
                   {"frame_means_after", report.frame_means_after},
                   {"total_var_before", report.total_var_before},
                   {"total_var_after", report.total_var_after},
                   {"reduction_pct", report.reduction_pct}};
  return j.dump(2);
}

} // namespace twophoton
