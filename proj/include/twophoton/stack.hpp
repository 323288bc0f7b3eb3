#pragma once

#include <string>
#include <vector>

#include "twophoton/types.hpp"

namespace twophoton {

// Acquisition default: 8 Hz frame clock.
inline constexpr double kFramePeriodSeconds = 0.125;

struct ChannelView;

// 4-D fluorescence recording laid out [channel][time][row][col], row-major
// within a frame. Channel 0 holds the structural dye, channel 1 the
// functional dye. Stacks are treated as immutable once built; analysis
// passes construct new stacks instead of mutating.
struct ImageStack {
  Index channels = 0;
  Index frames = 0;
  Index rows = 0;
  Index cols = 0;
  double frame_period_s = kFramePeriodSeconds;
  std::vector<float> data;

  static ImageStack zeros(Index channels, Index frames, Index rows, Index cols,
                          double frame_period_s = kFramePeriodSeconds);

  Index frame_size() const { return rows * cols; }
  Index total_size() const { return channels * frames * rows * cols; }

  FrameView frame(Index channel, Index t);
  ConstFrameView frame(Index channel, Index t) const;
  ChannelView channel(Index channel) const;

  // Checks the structural invariants: exact data length, finite values,
  // positive frame period.
  void validate() const;
};

// Read-only view of one channel's T x R x C block.
struct ChannelView {
  const ImageStack* stack = nullptr;
  Index channel = 0;

  Index frames() const { return stack->frames; }
  Index rows() const { return stack->rows; }
  Index cols() const { return stack->cols; }
  double frame_period_s() const { return stack->frame_period_s; }
  ConstFrameView frame(Index t) const { return stack->frame(channel, t); }
};

ConstFrameView frame_at(const ImageStack& stack, Index channel, Index t);

// Scalar series sampled off the imaging path (heart rate, blood pressure).
struct BioSignal {
  double sample_rate_hz = 0.0;
  std::vector<double> samples;
  std::string label;
};

// Shock-train protocol: every trial delivers shocks_per_trial pulses with a
// fixed onset-to-onset gap.
struct StimSchedule {
  std::vector<double> trial_starts_s;
  int shocks_per_trial = 12;
  double shock_duration_ms = 1.0;
  double inter_shock_gap_ms = 167.0;
  double current_mA = 1.5;
};

// Flattened shock onset times, one entry per shock, ordered within each
// trial. Length is trials * shocks_per_trial.
std::vector<double> shock_times(const StimSchedule& sched);

} // namespace twophoton
