#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace meanfield {

// All numerics run in 64-bit precision; gradient checks at 1e-6 tolerance
// are not feasible in single precision.
using Scalar = double;
using Index = Eigen::Index;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace meanfield
