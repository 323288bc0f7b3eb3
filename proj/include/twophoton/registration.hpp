#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "twophoton/errors.hpp"
#include "twophoton/stack.hpp"
#include "twophoton/types.hpp"

namespace twophoton {

// Per-frame displacement relative to the reference: column shift dx, row
// shift dy, rotation theta (radians) about the image center.
struct RigidTransform {
  double dx = 0.0;
  double dy = 0.0;
  double theta = 0.0;

  bool is_finite() const {
    return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(theta);
  }
  void require_finite() const {
    if (!is_finite())
      throw std::invalid_argument("rigid transform has non-finite components");
  }
};

// Transform whose warp undoes t's warp: rotation by -theta composed with
// the rotated, negated shift.
inline RigidTransform inverse(const RigidTransform& t) {
  const double c = std::cos(t.theta), s = std::sin(t.theta);
  RigidTransform inv;
  inv.theta = -t.theta;
  inv.dy = -(c * t.dy - s * t.dx);
  inv.dx = -(s * t.dy + c * t.dx);
  return inv;
}

struct AlignmentConfig {
  Index reference_channel = 0;
  Index reference_time = -1; // -1 selects the middle frame, floor(T/2)
  double max_shift_px = 10.0;
  double max_theta_rad = 0.1;
  double tol_px = 1e-3;
  double tol_rad = 1e-4;
  int max_iters = 200;
  int threads = 1;

  void validate() const {
    if (!(max_shift_px > 0.0) || !(max_theta_rad > 0.0))
      throw std::invalid_argument("alignment search bounds must be > 0");
    if (!(tol_px > 0.0) || !(tol_rad > 0.0))
      throw std::invalid_argument("alignment tolerances must be > 0");
    if (max_iters < 1)
      throw std::invalid_argument("max_iters must be >= 1");
  }
};

struct AlignmentResult {
  std::vector<RigidTransform> transforms; // one per frame
  std::vector<double> residual_sse;       // objective value at the optimum
  std::vector<MaskMatrix> valid_masks;    // true where the warped sample was in-bounds
  std::vector<std::uint8_t> failed;       // per-frame alignment-failure flags
  Index reference_time = 0;
};

namespace detail {

// Maps an output pixel of the warped image to its source location:
// rotate the offset from the image center by -theta, then subtract the
// shift. Center is ((R-1)/2, (C-1)/2).
struct WarpMap {
  double center_row, center_col, cos_t, sin_t, dy, dx;

  WarpMap(Index rows, Index cols, const RigidTransform& t)
      : center_row((static_cast<double>(rows) - 1.0) / 2.0),
        center_col((static_cast<double>(cols) - 1.0) / 2.0),
        cos_t(std::cos(t.theta)), sin_t(std::sin(t.theta)), dy(t.dy),
        dx(t.dx) {}

  void source(double r, double c, double& src_row, double& src_col) const {
    const double u = r - center_row;
    const double v = c - center_col;
    src_row = center_row + cos_t * u + sin_t * v - dy;
    src_col = center_col - sin_t * u + cos_t * v - dx;
  }
};

// Bilinear sample at (src_row, src_col); false when the location needs a
// neighbor outside the image. Exact-integer coordinates read one sample and
// reproduce it bit-exactly.
template <class Derived>
inline bool sample_bilinear(const Eigen::MatrixBase<Derived>& img,
                            double src_row, double src_col, double& out) {
  const double max_row = static_cast<double>(img.rows()) - 1.0;
  const double max_col = static_cast<double>(img.cols()) - 1.0;
  if (!(src_row >= 0.0 && src_row <= max_row && src_col >= 0.0 &&
        src_col <= max_col))
    return false;
  const Index r0 = static_cast<Index>(std::floor(src_row));
  const Index c0 = static_cast<Index>(std::floor(src_col));
  const double fr = src_row - static_cast<double>(r0);
  const double fc = src_col - static_cast<double>(c0);
  const double v00 = static_cast<double>(img(r0, c0));
  const double v01 = fc > 0.0 ? static_cast<double>(img(r0, c0 + 1)) : 0.0;
  const double v10 = fr > 0.0 ? static_cast<double>(img(r0 + 1, c0)) : 0.0;
  const double v11 =
      (fr > 0.0 && fc > 0.0) ? static_cast<double>(img(r0 + 1, c0 + 1)) : 0.0;
  out = (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) +
        fr * ((1.0 - fc) * v10 + fc * v11);
  return true;
}

// Nelder-Mead over (dx, dy, theta). Stops when the per-coordinate vertex
// spread drops below tol, or after max_iters. The best vertex never gets
// worse, so the result is at least as good as the starting point.
template <class F>
std::pair<Eigen::Vector3d, double>
simplex_minimize(F&& f, const Eigen::Vector3d& start,
                 const Eigen::Vector3d& step, const Eigen::Vector3d& tol,
                 int max_iters) {
  constexpr int kDim = 3;
  std::array<Eigen::Vector3d, kDim + 1> x;
  std::array<double, kDim + 1> fx;
  x[0] = start;
  fx[0] = f(start);
  for (int i = 0; i < kDim; ++i) {
    x[i + 1] = start;
    x[i + 1][i] += step[i];
    fx[i + 1] = f(x[i + 1]);
  }

  auto order = [&] {
    std::array<int, kDim + 1> idx{0, 1, 2, 3};
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return fx[a] < fx[b]; });
    std::array<Eigen::Vector3d, kDim + 1> xs;
    std::array<double, kDim + 1> fs;
    for (int i = 0; i <= kDim; ++i) {
      xs[i] = x[idx[i]];
      fs[i] = fx[idx[i]];
    }
    x = xs;
    fx = fs;
  };

  for (int iter = 0; iter < max_iters; ++iter) {
    order();

    Eigen::Vector3d spread = Eigen::Vector3d::Zero();
    for (int i = 1; i <= kDim; ++i)
      spread = spread.cwiseMax((x[i] - x[0]).cwiseAbs());
    if (spread[0] < tol[0] && spread[1] < tol[1] && spread[2] < tol[2])
      break;

    const Eigen::Vector3d centroid = (x[0] + x[1] + x[2]) / 3.0;
    const Eigen::Vector3d reflected = centroid + (centroid - x[kDim]);
    const double f_reflected = f(reflected);

    if (f_reflected < fx[0]) {
      const Eigen::Vector3d expanded = centroid + 2.0 * (reflected - centroid);
      const double f_expanded = f(expanded);
      if (f_expanded < f_reflected) {
        x[kDim] = expanded;
        fx[kDim] = f_expanded;
      } else {
        x[kDim] = reflected;
        fx[kDim] = f_reflected;
      }
    } else if (f_reflected < fx[kDim - 1]) {
      x[kDim] = reflected;
      fx[kDim] = f_reflected;
    } else {
      const bool outside = f_reflected < fx[kDim];
      const Eigen::Vector3d contracted =
          centroid + 0.5 * ((outside ? reflected : x[kDim]) - centroid);
      const double f_contracted = f(contracted);
      if (f_contracted < (outside ? f_reflected : fx[kDim])) {
        x[kDim] = contracted;
        fx[kDim] = f_contracted;
      } else {
        for (int i = 1; i <= kDim; ++i) {
          x[i] = x[0] + 0.5 * (x[i] - x[0]);
          fx[i] = f(x[i]);
        }
      }
    }
  }
  order();
  return {x[0], fx[0]};
}

} // namespace detail

// Warps a frame by t: each output pixel is the bilinear sample of the source
// at the inverse-mapped location. Out-of-bounds samples are masked false and
// written as 0. The identity transform reproduces the frame bit-exactly.
template <class Derived>
std::pair<ImageMatrix<typename Derived::Scalar>, MaskMatrix>
apply_rigid(const Eigen::MatrixBase<Derived>& frame, const RigidTransform& t) {
  using Scalar = typename Derived::Scalar;
  t.require_finite();
  const Index rows = frame.rows(), cols = frame.cols();
  ImageMatrix<Scalar> warped(rows, cols);
  MaskMatrix mask(rows, cols);
  const detail::WarpMap map(rows, cols, t);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double src_row, src_col, value;
      map.source(static_cast<double>(r), static_cast<double>(c), src_row,
                 src_col);
      if (detail::sample_bilinear(frame.derived(), src_row, src_col, value)) {
        warped(r, c) = static_cast<Scalar>(value);
        mask(r, c) = true;
      } else {
        warped(r, c) = Scalar(0);
        mask(r, c) = false;
      }
    }
  }
  return {std::move(warped), std::move(mask)};
}

// Valid-sample mask of apply_rigid for the given frame size, without
// touching pixel data. Depends on geometry only.
MaskMatrix warp_valid_mask(Index rows, Index cols, const RigidTransform& t);

// Mean squared error between the warped frame and the reference over the
// valid mask. Returns +inf when fewer than 25% of the pixels are valid, so
// the optimizer cannot escape toward transforms that crop the image away.
template <class DerivedA, class DerivedB>
double sse_objective(const Eigen::MatrixBase<DerivedA>& frame,
                     const Eigen::MatrixBase<DerivedB>& reference,
                     const RigidTransform& t) {
  if (frame.rows() != reference.rows() || frame.cols() != reference.cols())
    throw std::invalid_argument("sse_objective: dimension mismatch");
  t.require_finite();
  const Index rows = frame.rows(), cols = frame.cols();
  const detail::WarpMap map(rows, cols, t);
  double sum = 0.0;
  Index valid = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      double src_row, src_col, value;
      map.source(static_cast<double>(r), static_cast<double>(c), src_row,
                 src_col);
      if (detail::sample_bilinear(frame.derived(), src_row, src_col, value)) {
        const double d = value - static_cast<double>(reference(r, c));
        sum += d * d;
        ++valid;
      }
    }
  }
  if (valid * 4 < rows * cols)
    return std::numeric_limits<double>::infinity();
  return sum / static_cast<double>(valid);
}

// Two-stage transform estimation: an exhaustive integer-shift grid at
// theta = 0 to get past local minima, then simplex refinement over
// (dx, dy, theta) for sub-pixel precision. The returned residual is the
// objective at the returned transform and never exceeds the grid optimum.
template <class DerivedA, class DerivedB>
std::pair<RigidTransform, double>
estimate_transform(const Eigen::MatrixBase<DerivedA>& frame,
                   const Eigen::MatrixBase<DerivedB>& reference,
                   const AlignmentConfig& cfg) {
  if (frame.rows() != reference.rows() || frame.cols() != reference.cols())
    throw std::invalid_argument("estimate_transform: dimension mismatch");
  cfg.validate();

  const int shift = static_cast<int>(std::floor(cfg.max_shift_px));
  RigidTransform best;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int dy = -shift; dy <= shift; ++dy) {
    for (int dx = -shift; dx <= shift; ++dx) {
      const RigidTransform cand{static_cast<double>(dx),
                                static_cast<double>(dy), 0.0};
      const double sse = sse_objective(frame, reference, cand);
      if (sse < best_sse) {
        best_sse = sse;
        best = cand;
      }
    }
  }
  if (!std::isfinite(best_sse))
    throw AlignmentFailure("every candidate shift left fewer than 25% of "
                           "pixels valid");

  const auto bounded = [&](const Eigen::Vector3d& p) {
    if (std::abs(p[0]) > cfg.max_shift_px || std::abs(p[1]) > cfg.max_shift_px ||
        std::abs(p[2]) > cfg.max_theta_rad)
      return std::numeric_limits<double>::infinity();
    return sse_objective(frame, reference, RigidTransform{p[0], p[1], p[2]});
  };

  Eigen::Vector3d start(best.dx, best.dy, 0.0);
  Eigen::Vector3d step(best.dx + 0.5 <= cfg.max_shift_px ? 0.5 : -0.5,
                       best.dy + 0.5 <= cfg.max_shift_px ? 0.5 : -0.5,
                       std::min(0.01, cfg.max_theta_rad / 2.0));
  const Eigen::Vector3d tol(cfg.tol_px, cfg.tol_px, cfg.tol_rad);
  const auto [point, sse] =
      detail::simplex_minimize(bounded, start, step, tol, cfg.max_iters);
  return {RigidTransform{point[0], point[1], point[2]}, sse};
}

// Registers every frame of the stack against the reference frame (structural
// channel, middle of the experiment by default) and applies each frame's
// transform to all channels at that time index. Per-frame failures are
// recorded, not fatal: the frame is left unaligned with an identity
// transform and its flag set.
std::pair<ImageStack, AlignmentResult> align_stack(const ImageStack& stack,
                                                   const AlignmentConfig& cfg);

// CSV round-trip of per-frame transforms: `t,dx,dy,theta,residual,failed`.
void save_alignment_csv(const AlignmentResult& result,
                        const std::string& path);
AlignmentResult load_alignment_csv(const std::string& path); // masks not stored

} // namespace twophoton
