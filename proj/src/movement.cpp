#include "twophoton/movement.hpp"

#include <cmath>
#include <stdexcept>

#include "twophoton/errors.hpp"

namespace twophoton {

MovementSeries framediff_series(const ChannelView& ch) {
  const Index T = ch.frames();
  if (T < 2)
    throw InsufficientFramesError("framediff_series needs at least 2 frames");
  MovementSeries series;
  series.kind = MovementKind::framediff;
  series.frame_period_s = ch.frame_period_s();
  series.values.resize(static_cast<std::size_t>(T - 1));
  for (Index t = 0; t + 1 < T; ++t)
    series.values[static_cast<std::size_t>(t)] =
        (ch.frame(t + 1).cast<double>() - ch.frame(t).cast<double>())
            .cwiseAbs()
            .sum();
  return series;
}

MovementSeries shiftmag_series(const AlignmentResult& result,
                               double frame_period_s) {
  MovementSeries series;
  series.kind = MovementKind::shiftmag;
  series.frame_period_s = frame_period_s;
  series.values.reserve(result.transforms.size());
  for (const RigidTransform& t : result.transforms)
    series.values.push_back(std::hypot(t.dx, t.dy));
  return series;
}

LeveneReport movement_levene(const MovementSeries& rest,
                             const MovementSeries& stim, Center center) {
  if (rest.kind != stim.kind)
    throw std::invalid_argument(
        "movement_levene: series kinds must match (framediff vs shiftmag)");
  GroupedSamples samples;
  samples.groups = {rest.values, stim.values};
  return levene(samples, center);
}

} // namespace twophoton
