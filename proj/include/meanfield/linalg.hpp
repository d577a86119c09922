#pragma once

#include "meanfield/activation.hpp"
#include "meanfield/types.hpp"

namespace meanfield {

/// Matrix-vector product with a fixed summation order: each output entry is
/// accumulated over columns left to right, so the result is bit-identical to
/// a naive triple-loop evaluation. Throws std::invalid_argument on a
/// dimension mismatch.
Vector matvec(const Matrix& m, const Vector& v);

/// One residual block: f(x, theta) = sigma(theta x), sigma elementwise.
/// theta must be square with theta.cols() == x.size().
Vector apply_block(const Matrix& theta, const Vector& x, Activation act);

/// Jacobians of f(x, theta) = sigma(theta x) at a point.
///
/// jac_x is d f / d x with entries sigma'((theta x)_i) theta_ij. The theta
/// Jacobian has outer-product structure and is exposed as its adjoint map:
/// theta_cotangent(u) returns the matrix with entries u_i sigma'((theta x)_i) x_j,
/// i.e. the pullback of a cotangent u on the output to theta space.
struct BlockJacobians {
  Matrix jac_x;
  Vector act_grad;  // sigma'(theta x)
  Vector input;     // x

  Matrix theta_cotangent(const Vector& u) const;
};

BlockJacobians block_jacobians(const Matrix& theta, const Vector& x, Activation act);

}  // namespace meanfield
