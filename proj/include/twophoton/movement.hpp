#pragma once

#include <vector>

#include "twophoton/registration.hpp"
#include "twophoton/stack.hpp"
#include "twophoton/variance_tests.hpp"

namespace twophoton {

enum class MovementKind { framediff, shiftmag };

// Brain-movement time series: either the sum of absolute frame-to-frame
// intensity differences (length T-1) or per-frame shift magnitudes from a
// registration result (length T).
struct MovementSeries {
  std::vector<double> values;
  MovementKind kind = MovementKind::framediff;
  double frame_period_s = kFramePeriodSeconds;
};

// values[t] = sum over pixels of |frame(t+1) - frame(t)|.
MovementSeries framediff_series(const ChannelView& ch);

// values[t] = sqrt(dx_t^2 + dy_t^2).
MovementSeries shiftmag_series(const AlignmentResult& result,
                               double frame_period_s = kFramePeriodSeconds);

// Levene's test with two groups: the full resting series versus the full
// stimulated series.
LeveneReport movement_levene(const MovementSeries& rest,
                             const MovementSeries& stim,
                             Center center = Center::mean);

} // namespace twophoton
