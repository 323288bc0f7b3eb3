#include <doctest.h>

#include <cmath>

#include "twophoton/errors.hpp"
#include "twophoton/intensity.hpp"
#include "twophoton/registration.hpp"
#include "twophoton/synthgen.hpp"

using namespace twophoton;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.rows = 48;
  cfg.cols = 48;
  cfg.frames = 8;
  cfg.n_cells = 4;
  cfg.cell_radius_px = 3.0;
  return cfg;
}

} // namespace

TEST_CASE("static configs produce identity truth and a frozen scene") {
  auto [stack, truth] = generate(small_config());
  CHECK(stack.channels == 2);
  CHECK(stack.frames == 8);
  CHECK(stack.rows == 48);
  CHECK(stack.frame_period_s == 0.125);
  REQUIRE(truth.true_transforms.size() == 8);
  for (const RigidTransform& t : truth.true_transforms) {
    CHECK(t.dx == 0.0);
    CHECK(t.dy == 0.0);
    CHECK(t.theta == 0.0);
  }
  for (double g : truth.per_frame_gain)
    CHECK(g == 1.0);

  // No noise, no wobble, no transients: every frame is bit-identical.
  for (Index ch = 0; ch < 2; ++ch)
    for (Index t = 1; t < stack.frames; ++t)
      CHECK((stack.frame(ch, t).array() == stack.frame(ch, 0).array()).all());
}

TEST_CASE("generation is bit-deterministic for identical configs") {
  SynthConfig cfg = small_config();
  cfg.noise_sd = 1.5;
  cfg.drift_amplitude_px = 1.0;
  cfg.drift_period_frames = 4;
  cfg.theta_amplitude_rad = 0.01;
  cfg.global_gain_wobble = 0.02;
  cfg.seed = 123;
  auto [a, truth_a] = generate(cfg);
  auto [b, truth_b] = generate(cfg);
  CHECK(a.data == b.data);
  CHECK(truth_a.cell_centers == truth_b.cell_centers);

  cfg.seed = 124;
  auto [c, truth_c] = generate(cfg);
  CHECK(a.data != c.data);
}

TEST_CASE("structural channel ignores transients; functional channel fires") {
  SynthConfig cfg = small_config();
  cfg.frames = 16;
  cfg.active_cells = {0, 2};
  cfg.transient_gain = 50.0;
  cfg.stim.trial_starts_s = {0.25};
  cfg.stim.shocks_per_trial = 3;
  auto [stack, truth] = generate(cfg);

  CHECK(truth.cell_active_flags ==
        std::vector<bool>{true, false, true, false});

  for (Index t = 1; t < stack.frames; ++t)
    CHECK((stack.frame(0, t).array() == stack.frame(0, 0).array()).all());

  // After the first shock (t = 0.25 s = frame 2) the functional channel
  // brightens somewhere.
  bool changed = false;
  for (Index t = 2; t < stack.frames && !changed; ++t)
    changed = !(stack.frame(1, t).array() == stack.frame(1, 0).array()).all();
  CHECK(changed);
}

TEST_CASE("cell placement respects margins and separation") {
  SynthConfig cfg = small_config();
  cfg.n_cells = 5;
  cfg.seed = 9;
  auto [stack, truth] = generate(cfg);
  REQUIRE(truth.cell_centers.size() == 5);
  for (const auto& [r, c] : truth.cell_centers) {
    CHECK(r > 2.0 * cfg.cell_radius_px);
    CHECK(c > 2.0 * cfg.cell_radius_px);
    CHECK(r < 47.0 - 2.0 * cfg.cell_radius_px);
    CHECK(c < 47.0 - 2.0 * cfg.cell_radius_px);
  }
  for (std::size_t i = 0; i < truth.cell_centers.size(); ++i)
    for (std::size_t j = i + 1; j < truth.cell_centers.size(); ++j) {
      const double d = std::hypot(
          truth.cell_centers[i].first - truth.cell_centers[j].first,
          truth.cell_centers[i].second - truth.cell_centers[j].second);
      CHECK(d >= 4.0 * cfg.cell_radius_px);
    }
}

TEST_CASE("align_stack recovers the generated motion") {
  SynthConfig cfg = small_config();
  cfg.rows = 64;
  cfg.cols = 64;
  cfg.frames = 10;
  cfg.n_cells = 5;
  cfg.cell_radius_px = 4.0;
  cfg.drift_amplitude_px = 2.0;
  cfg.drift_period_frames = 10;
  cfg.theta_amplitude_rad = 0.008;
  cfg.seed = 31;
  auto [stack, truth] = generate(cfg);

  AlignmentConfig acfg;
  acfg.max_shift_px = 4.0;
  const auto [aligned, result] = align_stack(stack, acfg);

  double err_px = 0.0, err_rad = 0.0;
  for (std::size_t t = 0; t < truth.true_transforms.size(); ++t) {
    err_px += std::abs(result.transforms[t].dx - truth.true_transforms[t].dx);
    err_px += std::abs(result.transforms[t].dy - truth.true_transforms[t].dy);
    err_rad +=
        std::abs(result.transforms[t].theta - truth.true_transforms[t].theta);
  }
  err_px /= 2.0 * static_cast<double>(truth.true_transforms.size());
  err_rad /= static_cast<double>(truth.true_transforms.size());
  CHECK(err_px < 0.1);
  CHECK(err_rad < 0.005);
}

TEST_CASE("mean_equalize flattens a gain-wobble-only stack") {
  SynthConfig cfg = small_config();
  cfg.frames = 12;
  cfg.global_gain_wobble = 0.05;
  cfg.drift_period_frames = 6;
  cfg.seed = 4;
  auto [stack, truth] = generate(cfg);

  const auto [equalized, report] = mean_equalize(stack.channel(1));
  for (double m : report.frame_means_after)
    CHECK(std::abs(m - report.standard) <= 1e-6 * report.standard);
  CHECK(report.total_var_after < report.total_var_before);

  // Frame means track the generated gain: before/gain is constant.
  const double ratio0 = report.frame_means_before[0] / truth.per_frame_gain[0];
  for (std::size_t t = 1; t < truth.per_frame_gain.size(); ++t) {
    const double ratio =
        report.frame_means_before[t] / truth.per_frame_gain[t];
    CHECK(std::abs(ratio - ratio0) <= 1e-5 * ratio0);
  }
}

TEST_CASE("difference map localizes the active cells") {
  SynthConfig cfg = small_config();
  cfg.rows = 64;
  cfg.cols = 64;
  cfg.frames = 24;
  cfg.n_cells = 6;
  cfg.cell_radius_px = 3.5;
  cfg.active_cells = {1, 4};
  cfg.transient_gain = 40.0;
  cfg.seed = 77;

  SynthConfig stim_cfg = cfg;
  stim_cfg.stim.trial_starts_s = {0.25};
  auto [rest_stack, rest_truth] = generate(cfg);
  auto [stim_stack, stim_truth] = generate(stim_cfg);

  // Same seed: identical geometry, so the difference isolates the transients.
  CHECK(rest_truth.cell_centers == stim_truth.cell_centers);

  const MapMatrix diff =
      difference_map(pixel_stats(stim_stack.channel(1)).mean_map,
                     pixel_stats(rest_stack.channel(1)).mean_map);

  double peak = diff.maxCoeff();
  CHECK(peak > 0.0);
  for (Index r = 0; r < diff.rows(); ++r) {
    for (Index c = 0; c < diff.cols(); ++c) {
      if (diff(r, c) <= 0.5 * peak)
        continue;
      double nearest = 1e9;
      for (int cell : cfg.active_cells) {
        const auto& [cr, cc] = rest_truth.cell_centers[std::size_t(cell)];
        nearest = std::min(nearest, std::hypot(r - cr, c - cc));
      }
      CHECK(nearest <= cfg.cell_radius_px);
    }
  }
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig cfg = small_config();

  SynthConfig zero_rows = cfg;
  zero_rows.rows = 0;
  CHECK_THROWS_AS(generate(zero_rows), ConfigError);

  SynthConfig bad_active = cfg;
  bad_active.active_cells = {7};
  CHECK_THROWS_AS(generate(bad_active), ConfigError);

  SynthConfig negative_noise = cfg;
  negative_noise.noise_sd = -1.0;
  CHECK_THROWS_AS(generate(negative_noise), ConfigError);

  SynthConfig bad_radius = cfg;
  bad_radius.cell_radius_px = 0.0;
  CHECK_THROWS_AS(generate(bad_radius), ConfigError);

  // Too many large cells for the field: placement must fail loudly.
  SynthConfig crowded = cfg;
  crowded.n_cells = 50;
  crowded.cell_radius_px = 6.0;
  CHECK_THROWS_AS(generate(crowded), ConfigError);
}
