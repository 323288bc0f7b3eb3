#pragma once

#include <Eigen/Dense>

namespace twophoton {

using Index = Eigen::Index;

// Image-plane types are row-major so stack frames can be mapped in place.
template <typename Scalar>
using ImageMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using FrameMatrix = ImageMatrix<float>; // raw intensity frames
using MapMatrix = ImageMatrix<double>;  // derived maps (mean, variance, difference)
using MaskMatrix =
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using FrameView = Eigen::Map<FrameMatrix>;
using ConstFrameView = Eigen::Map<const FrameMatrix>;

} // namespace twophoton
