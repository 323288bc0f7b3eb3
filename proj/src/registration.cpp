#include "twophoton/registration.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "twophoton/parallel.hpp"
#include "twophoton/stack_io.hpp"

namespace twophoton {

MaskMatrix warp_valid_mask(Index rows, Index cols, const RigidTransform& t) {
  t.require_finite();
  MaskMatrix mask(rows, cols);
  const detail::WarpMap map(rows, cols, t);
  const double max_row = static_cast<double>(rows) - 1.0;
  const double max_col = static_cast<double>(cols) - 1.0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double src_row, src_col;
      map.source(static_cast<double>(r), static_cast<double>(c), src_row,
                 src_col);
      mask(r, c) = src_row >= 0.0 && src_row <= max_row && src_col >= 0.0 &&
                   src_col <= max_col;
    }
  }
  return mask;
}

std::pair<ImageStack, AlignmentResult> align_stack(const ImageStack& stack,
                                                   const AlignmentConfig& cfg) {
  cfg.validate();
  const Index T = stack.frames;
  const Index ref_time =
      cfg.reference_time < 0 ? T / 2 : cfg.reference_time;
  if (cfg.reference_channel < 0 || cfg.reference_channel >= stack.channels)
    throw std::out_of_range("reference channel out of range");
  if (ref_time >= T)
    throw std::out_of_range("reference time out of range");

  const ConstFrameView reference = stack.frame(cfg.reference_channel, ref_time);

  ImageStack aligned = ImageStack::zeros(stack.channels, T, stack.rows,
                                         stack.cols, stack.frame_period_s);
  AlignmentResult result;
  result.transforms.resize(static_cast<std::size_t>(T));
  result.residual_sse.resize(static_cast<std::size_t>(T));
  result.valid_masks.resize(static_cast<std::size_t>(T));
  result.failed.assign(static_cast<std::size_t>(T), 0);
  result.reference_time = ref_time;

  parallel_for(T, cfg.threads, [&](Index t) {
    const auto i = static_cast<std::size_t>(t);
    RigidTransform transform; // identity
    if (t == ref_time) {
      result.residual_sse[i] = 0.0;
    } else {
      const ConstFrameView moving = stack.frame(cfg.reference_channel, t);
      try {
        auto [estimated, residual] = estimate_transform(moving, reference, cfg);
        transform = estimated;
        result.residual_sse[i] = residual;
      } catch (const AlignmentFailure&) {
        result.failed[i] = 1;
        result.residual_sse[i] = sse_objective(moving, reference, transform);
      }
    }
    result.transforms[i] = transform;
    for (Index ch = 0; ch < stack.channels; ++ch) {
      auto [warped, mask] = apply_rigid(stack.frame(ch, t), transform);
      aligned.frame(ch, t) = warped;
      if (ch == 0)
        result.valid_masks[i] = std::move(mask);
    }
  });

  return {std::move(aligned), std::move(result)};
}

void save_alignment_csv(const AlignmentResult& result,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open for writing: " + path);
  out << "t,dx,dy,theta,residual,failed\n";
  for (std::size_t t = 0; t < result.transforms.size(); ++t) {
    const RigidTransform& tr = result.transforms[t];
    out << t << ',' << format_number(tr.dx) << ',' << format_number(tr.dy)
        << ',' << format_number(tr.theta) << ','
        << format_number(result.residual_sse[t]) << ','
        << int(result.failed[t]) << '\n';
  }
  if (!out.flush())
    throw IoError("write failed: " + path);
}

namespace {

double parse_field(const std::string& field, const std::string& path) {
  if (field == "inf")
    return std::numeric_limits<double>::infinity();
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError("non-numeric field '" + field + "' in " + path);
  return value;
}

} // namespace

AlignmentResult load_alignment_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("empty alignment csv: " + path);
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  if (line != "t,dx,dy,theta,residual,failed")
    throw FormatError("unexpected alignment csv header in " + path);

  AlignmentResult result;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    std::stringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ','))
      fields.push_back(field);
    if (fields.size() != 6)
      throw FormatError("expected 6 fields per row in " + path);
    RigidTransform t;
    t.dx = parse_field(fields[1], path);
    t.dy = parse_field(fields[2], path);
    t.theta = parse_field(fields[3], path);
    result.transforms.push_back(t);
    result.residual_sse.push_back(parse_field(fields[4], path));
    result.failed.push_back(
        static_cast<std::uint8_t>(parse_field(fields[5], path) != 0.0));
  }
  return result;
}

} // namespace twophoton
