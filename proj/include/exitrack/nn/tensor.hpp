#pragma once

#include <Eigen/Core>

namespace exitrack {

/// Dense row-major matrix used for every activation, parameter, and image tensor.
/// Spatial maps are stored as (H*W) x C, one row per location.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace exitrack
