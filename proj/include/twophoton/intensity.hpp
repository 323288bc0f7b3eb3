#pragma once

#include <string>
#include <utility>
#include <vector>

#include "twophoton/stack.hpp"
#include "twophoton/types.hpp"

namespace twophoton {

// Per-pixel temporal statistics of one channel.
struct PixelStats {
  MapMatrix mean_map;
  MapMatrix var_map; // sample variance, denominator T-1
  Index frames_used = 0;
};

struct EqualizationReport {
  double standard = 0.0; // target mean: the mean of the frame means
  std::vector<double> frame_means_before;
  std::vector<double> frame_means_after;
  double total_var_before = 0.0;
  double total_var_after = 0.0;
  double reduction_pct = 0.0;
};

// Arithmetic mean of each frame's pixels, one entry per time point.
std::vector<double> frame_means(const ChannelView& ch);

// Rescales every frame to the common mean: each pixel is multiplied by
// standard / (its frame's mean). Returns the equalized channel as a
// 1-channel stack plus the before/after report.
std::pair<ImageStack, EqualizationReport> mean_equalize(const ChannelView& ch);

PixelStats pixel_stats(const ChannelView& ch);
// Restricts statistics to pixels valid in every frame; other pixels are
// reported as zero.
PixelStats pixel_stats(const ChannelView& ch, const MaskMatrix& valid);

// Sum of the per-pixel variances.
double total_variance(const PixelStats& ps);

// 100 * (before - after) / before.
double variance_reduction_pct(double before, double after);

// One (log(mean + eps), log(var + eps)) pair per pixel, row-major order.
std::vector<std::pair<double, double>>
mean_variance_scatter(const PixelStats& ps, double epsilon = 1e-12);

// Elementwise a - b; by convention a is the stimulated state and b the
// resting state.
MapMatrix difference_map(const MapMatrix& mean_a, const MapMatrix& mean_b);

// JSON object with all six report fields.
std::string to_json_string(const EqualizationReport& report);

} // namespace twophoton
