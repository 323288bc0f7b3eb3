#include "twophoton/stack.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "twophoton/errors.hpp"

namespace twophoton {

ImageStack ImageStack::zeros(Index channels, Index frames, Index rows,
                             Index cols, double frame_period_s) {
  if (channels < 1 || frames < 1 || rows < 1 || cols < 1)
    throw std::invalid_argument("ImageStack::zeros: all dimensions must be >= 1");
  if (!(frame_period_s > 0.0))
    throw std::invalid_argument("ImageStack::zeros: frame_period_s must be > 0");
  ImageStack s;
  s.channels = channels;
  s.frames = frames;
  s.rows = rows;
  s.cols = cols;
  s.frame_period_s = frame_period_s;
  s.data.assign(static_cast<std::size_t>(s.total_size()), 0.0f);
  return s;
}

namespace {

Index frame_offset(const ImageStack& s, Index channel, Index t) {
  if (channel < 0 || channel >= s.channels)
    throw std::out_of_range("channel index " + std::to_string(channel) +
                            " out of range [0, " + std::to_string(s.channels) + ")");
  if (t < 0 || t >= s.frames)
    throw std::out_of_range("frame index " + std::to_string(t) +
                            " out of range [0, " + std::to_string(s.frames) + ")");
  return (channel * s.frames + t) * s.frame_size();
}

} // namespace

FrameView ImageStack::frame(Index channel, Index t) {
  return FrameView(data.data() + frame_offset(*this, channel, t), rows, cols);
}

ConstFrameView ImageStack::frame(Index channel, Index t) const {
  return ConstFrameView(data.data() + frame_offset(*this, channel, t), rows, cols);
}

ChannelView ImageStack::channel(Index channel) const {
  if (channel < 0 || channel >= channels)
    throw std::out_of_range("channel index " + std::to_string(channel) +
                            " out of range [0, " + std::to_string(channels) + ")");
  return ChannelView{this, channel};
}

void ImageStack::validate() const {
  if (channels < 1 || frames < 1 || rows < 1 || cols < 1)
    throw FormatError("stack dimensions must all be >= 1");
  if (!(frame_period_s > 0.0))
    throw FormatError("frame_period_s must be > 0");
  if (data.size() != static_cast<std::size_t>(total_size()))
    throw SizeMismatchError("stack holds " + std::to_string(data.size()) +
                            " values, dimensions require " +
                            std::to_string(total_size()));
  for (float v : data)
    if (!std::isfinite(v))
      throw DataIntegrityError("stack contains non-finite intensity values");
}

ConstFrameView frame_at(const ImageStack& stack, Index channel, Index t) {
  return stack.frame(channel, t);
}

std::vector<double> shock_times(const StimSchedule& sched) {
  std::vector<double> times;
  times.reserve(sched.trial_starts_s.size() *
                static_cast<std::size_t>(std::max(sched.shocks_per_trial, 0)));
  const double gap_s = sched.inter_shock_gap_ms / 1000.0;
  for (double start : sched.trial_starts_s)
    for (int k = 0; k < sched.shocks_per_trial; ++k)
      times.push_back(start + k * gap_s);
  return times;
}

} // namespace twophoton
