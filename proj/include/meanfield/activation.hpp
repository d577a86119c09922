#pragma once

#include "meanfield/types.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace meanfield {

/// Elementwise activation of a residual block f(x, theta) = sigma(theta x).
enum class Activation { ReLU, Tanh, Sigmoid };

/// Tanh and Sigmoid have Lipschitz derivatives; ReLU does not.
inline constexpr bool is_smooth(Activation act) { return act != Activation::ReLU; }

/// sigma(z). The ReLU subgradient convention sigma'(0) = 0 is fixed here so
/// that tests are unambiguous.
inline Scalar activation_value(Activation act, Scalar z) {
  switch (act) {
    case Activation::ReLU:
      return z > 0 ? z : 0.0;
    case Activation::Tanh:
      return std::tanh(z);
    case Activation::Sigmoid:
      return 1.0 / (1.0 + std::exp(-z));
  }
  return 0.0;
}

/// sigma'(z), matching activation_value to first order.
inline Scalar activation_derivative(Activation act, Scalar z) {
  switch (act) {
    case Activation::ReLU:
      return z > 0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const Scalar t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Sigmoid: {
      const Scalar s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
  }
  return 0.0;
}

inline Vector apply_activation(Activation act, const Vector& z) {
  Vector out(z.size());
  for (Index i = 0; i < z.size(); ++i) out[i] = activation_value(act, z[i]);
  return out;
}

inline Vector apply_activation_derivative(Activation act, const Vector& z) {
  Vector out(z.size());
  for (Index i = 0; i < z.size(); ++i) out[i] = activation_derivative(act, z[i]);
  return out;
}

inline std::string to_string(Activation act) {
  switch (act) {
    case Activation::ReLU:
      return "relu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "?";
}

inline Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation: '" + name + "'");
}

}  // namespace meanfield
