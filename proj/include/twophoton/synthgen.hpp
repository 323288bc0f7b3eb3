#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "twophoton/registration.hpp"
#include "twophoton/stack.hpp"

namespace twophoton {

// Synthetic two-photon stack: Gaussian-blob cells over a flat baseline,
// sinusoidal rigid drift, per-frame gain wobble, shock-locked calcium
// transients on the active cells, and counter-based pixel noise. Identical
// configs produce bit-identical stacks.
struct SynthConfig {
  Index rows = 128;
  Index cols = 128;
  Index frames = 100;
  int n_cells = 10;
  double cell_radius_px = 6.0;
  double baseline = 20.0;
  double noise_sd = 0.0;
  double drift_amplitude_px = 0.0;
  Index drift_period_frames = 50;
  double theta_amplitude_rad = 0.0;
  std::vector<int> active_cells;
  double transient_gain = 0.0;
  StimSchedule stim; // no trials = no transients
  double global_gain_wobble = 0.0;
  std::uint64_t seed = 0;
};

struct SynthTruth {
  // Transform that aligns each frame back onto the middle frame's pose;
  // identity at t = floor(frames/2).
  std::vector<RigidTransform> true_transforms;
  std::vector<std::pair<double, double>> cell_centers; // (row, col)
  std::vector<bool> cell_active_flags;
  std::vector<double> per_frame_gain;
};

std::pair<ImageStack, SynthTruth> generate(const SynthConfig& cfg);

} // namespace twophoton
