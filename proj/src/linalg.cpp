#include "meanfield/linalg.hpp"

#include <stdexcept>
#include <string>

namespace meanfield {

namespace {

void check_block_dims(const Matrix& theta, const Vector& x) {
  if (theta.rows() != theta.cols())
    throw std::invalid_argument("block theta must be square, got " +
                                std::to_string(theta.rows()) + "x" +
                                std::to_string(theta.cols()));
  if (theta.cols() != x.size())
    throw std::invalid_argument("block dimension mismatch: theta is " +
                                std::to_string(theta.rows()) + "x" +
                                std::to_string(theta.cols()) + ", x has dim " +
                                std::to_string(x.size()));
}

}  // namespace

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size())
    throw std::invalid_argument("matvec dimension mismatch: " + std::to_string(m.rows()) +
                                "x" + std::to_string(m.cols()) + " * dim " +
                                std::to_string(v.size()));
  Vector out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    Scalar acc = 0.0;
    for (Index j = 0; j < m.cols(); ++j) acc += m(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

Vector apply_block(const Matrix& theta, const Vector& x, Activation act) {
  check_block_dims(theta, x);
  return apply_activation(act, matvec(theta, x));
}

Matrix BlockJacobians::theta_cotangent(const Vector& u) const {
  if (u.size() != act_grad.size())
    throw std::invalid_argument("cotangent dimension mismatch");
  return (u.cwiseProduct(act_grad)) * input.transpose();
}

BlockJacobians block_jacobians(const Matrix& theta, const Vector& x, Activation act) {
  check_block_dims(theta, x);
  BlockJacobians jac;
  jac.act_grad = apply_activation_derivative(act, matvec(theta, x));
  jac.input = x;
  jac.jac_x = jac.act_grad.asDiagonal() * theta;
  return jac;
}

}  // namespace meanfield
