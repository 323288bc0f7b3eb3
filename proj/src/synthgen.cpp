#include "twophoton/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "twophoton/errors.hpp"
#include "twophoton/rng.hpp"

namespace twophoton {

namespace {

// Disjoint counter blocks so placement, amplitude and noise draws never
// overlap no matter how many rejection-sampling attempts placement needs.
constexpr std::uint64_t kAmplitudeBase = std::uint64_t{1} << 24;
constexpr std::uint64_t kNoiseBase = std::uint64_t{1} << 32;
constexpr int kPlacementAttempts = 1000;
constexpr double kTransientTauSeconds = 1.0;
// Peak blob brightness before the per-cell jitter in [0.7, 1.3).
constexpr double kBlobAmplitude = 100.0;

void validate_config(const SynthConfig& cfg) {
  if (cfg.rows < 1 || cfg.cols < 1 || cfg.frames < 1)
    throw ConfigError("synth config: rows, cols and frames must be >= 1");
  if (cfg.n_cells < 1)
    throw ConfigError("synth config: n_cells must be >= 1");
  if (cfg.drift_period_frames < 1)
    throw ConfigError("synth config: drift_period_frames must be >= 1");
  if (!(cfg.cell_radius_px > 0.0))
    throw ConfigError("synth config: cell_radius_px must be > 0");
  if (cfg.baseline < 0.0 || cfg.noise_sd < 0.0 || cfg.drift_amplitude_px < 0.0 ||
      cfg.theta_amplitude_rad < 0.0 || cfg.transient_gain < 0.0 ||
      cfg.global_gain_wobble < 0.0)
    throw ConfigError("synth config: amplitudes must be non-negative");
  for (int cell : cfg.active_cells) {
    if (cell < 0 || cell >= cfg.n_cells)
      throw ConfigError("synth config: active cell index " + std::to_string(cell) +
                        " outside [0, " + std::to_string(cfg.n_cells) + ")");
  }
}

// Keep cells far enough from the border that no part of a blob leaves the
// field of view under the worst-case drift, so motion never changes what a
// cell looks like, only where it sits.
double placement_margin(const SynthConfig& cfg) {
  const double rotation_reach =
      cfg.theta_amplitude_rad * std::hypot(double(cfg.rows), double(cfg.cols)) / 2.0;
  return 2.0 * cfg.cell_radius_px + cfg.drift_amplitude_px + rotation_reach + 1.0;
}

std::vector<std::pair<double, double>> place_cells(const SynthConfig& cfg,
                                                   CounterRng& rng) {
  const double margin = placement_margin(cfg);
  const double row_span = double(cfg.rows - 1) - 2.0 * margin;
  const double col_span = double(cfg.cols - 1) - 2.0 * margin;
  if (row_span <= 0.0 || col_span <= 0.0)
    throw ConfigError("synth config: field too small for cells of radius " +
                      std::to_string(cfg.cell_radius_px) +
                      " under the requested motion");

  const double min_separation = 4.0 * cfg.cell_radius_px;
  std::vector<std::pair<double, double>> centers;
  centers.reserve(std::size_t(cfg.n_cells));
  std::uint64_t counter = 0;
  for (int i = 0; i < cfg.n_cells; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const double r = margin + row_span * rng.uniform01(counter++);
      const double c = margin + col_span * rng.uniform01(counter++);
      placed = std::all_of(centers.begin(), centers.end(), [&](const auto& p) {
        return std::hypot(p.first - r, p.second - c) >= min_separation;
      });
      if (placed) centers.emplace_back(r, c);
    }
    if (!placed)
      throw ConfigError("synth config: could not place " + std::to_string(cfg.n_cells) +
                        " cells with radius " + std::to_string(cfg.cell_radius_px) +
                        " in a " + std::to_string(cfg.rows) + "x" +
                        std::to_string(cfg.cols) + " field");
  }
  return centers;
}

// Shock-locked calcium level: every shock at or before frame time t_f adds an
// exponentially decaying kernel exp(-(t_f - s) / tau).
std::vector<double> transient_levels(const SynthConfig& cfg,
                                     const std::vector<double>& shocks) {
  std::vector<double> level(std::size_t(cfg.frames), 0.0);
  for (Index t = 0; t < cfg.frames; ++t) {
    const double t_f = double(t) * kFramePeriodSeconds;
    double sum = 0.0;
    for (double s : shocks) {
      if (s <= t_f) sum += std::exp(-(t_f - s) / kTransientTauSeconds);
    }
    level[std::size_t(t)] = sum;
  }
  return level;
}

} // namespace

std::pair<ImageStack, SynthTruth> generate(const SynthConfig& cfg) {
  validate_config(cfg);
  CounterRng rng(cfg.seed);

  SynthTruth truth;
  truth.cell_centers = place_cells(cfg, rng);
  truth.cell_active_flags.assign(std::size_t(cfg.n_cells), false);
  for (int cell : cfg.active_cells) truth.cell_active_flags[std::size_t(cell)] = true;

  std::vector<double> base_amplitude(std::size_t(cfg.n_cells));
  for (int i = 0; i < cfg.n_cells; ++i)
    base_amplitude[std::size_t(i)] =
        kBlobAmplitude * (0.7 + 0.6 * rng.uniform01(kAmplitudeBase + std::uint64_t(i)));

  // Sinusoidal drift with harmonically related axes, phased so the middle
  // frame carries the identity transform.
  const Index t_mid = cfg.frames / 2;
  const double omega = 2.0 * std::numbers::pi / double(cfg.drift_period_frames);
  truth.true_transforms.resize(std::size_t(cfg.frames));
  truth.per_frame_gain.resize(std::size_t(cfg.frames));
  for (Index t = 0; t < cfg.frames; ++t) {
    const double tau = double(t - t_mid);
    RigidTransform& d = truth.true_transforms[std::size_t(t)];
    d.dx = cfg.drift_amplitude_px * std::sin(omega * tau);
    d.dy = cfg.drift_amplitude_px * std::sin(2.0 * omega * tau);
    d.theta = cfg.theta_amplitude_rad * std::sin(3.0 * omega * tau);
    truth.per_frame_gain[std::size_t(t)] =
        1.0 + cfg.global_gain_wobble * std::sin(omega * tau);
  }

  const std::vector<double> shocks = shock_times(cfg.stim);
  const std::vector<double> level = transient_levels(cfg, shocks);

  const double sigma = cfg.cell_radius_px / 2.0;
  const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
  const double cutoff_sq = 16.0 * cfg.cell_radius_px * cfg.cell_radius_px;

  ImageStack stack = ImageStack::zeros(2, cfg.frames, cfg.rows, cfg.cols);
  stack.frame_period_s = kFramePeriodSeconds;

  std::vector<double> amp(std::size_t(cfg.n_cells));
  for (Index t = 0; t < cfg.frames; ++t) {
    // Channel 0 is structural: constant cell brightness. Channel 1 is
    // functional: active cells ride the shock-locked transient.
    for (Index ch = 0; ch < 2; ++ch) {
      for (int i = 0; i < cfg.n_cells; ++i) {
        double a = base_amplitude[std::size_t(i)];
        if (ch == 1 && truth.cell_active_flags[std::size_t(i)])
          a += cfg.transient_gain * level[std::size_t(t)];
        amp[std::size_t(i)] = a;
      }
      // Sample the analytic scene through the frame's displacement: the pixel
      // at (r, c) shows the scene point that the aligning transform would
      // bring back there, so recovering true_transforms realigns the stack.
      const detail::WarpMap map(cfg.rows, cfg.cols,
                                inverse(truth.true_transforms[std::size_t(t)]));
      const double gain = truth.per_frame_gain[std::size_t(t)];
      FrameView frame = stack.frame(ch, t);
      for (Index r = 0; r < cfg.rows; ++r) {
        for (Index c = 0; c < cfg.cols; ++c) {
          double sr = 0.0, sc = 0.0;
          map.source(r, c, sr, sc);
          double value = cfg.baseline;
          for (int i = 0; i < cfg.n_cells; ++i) {
            const double dr = sr - truth.cell_centers[std::size_t(i)].first;
            const double dc = sc - truth.cell_centers[std::size_t(i)].second;
            const double dist_sq = dr * dr + dc * dc;
            if (dist_sq <= cutoff_sq)
              value += amp[std::size_t(i)] * std::exp(-dist_sq * inv_two_sigma_sq);
          }
          value *= gain;
          if (cfg.noise_sd > 0.0) {
            const std::uint64_t idx =
                std::uint64_t(((ch * cfg.frames + t) * cfg.rows + r) * cfg.cols + c);
            value += cfg.noise_sd * rng.normal(kNoiseBase + idx);
          }
          frame(r, c) = float(value);
        }
      }
    }
  }

  return {std::move(stack), std::move(truth)};
}

} // namespace twophoton
