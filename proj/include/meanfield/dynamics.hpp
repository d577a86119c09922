#pragma once

#include "meanfield/activation.hpp"
#include "meanfield/ensemble.hpp"
#include "meanfield/types.hpp"

#include <string>
#include <vector>

namespace meanfield {

/// What happens on the residual interval [tau^{n-1}, 1] after the last sorted
/// block: Drop leaves it without dynamics, ExtendLast applies the last block
/// once more with step 1 - tau^{n-1}.
enum class TailMode { Drop, ExtendLast };

std::string to_string(TailMode mode);
TailMode parse_tail_mode(const std::string& name);

/// The fixed (untrained) parts of the model: the feature map w2 (d2 x d1),
/// the pooling vector w1 (d2, unit norm), the block activation, the Q_r
/// clamp radius r, and the data bounds R1 (input ball) and R2 (targets).
struct ModelConfig {
  Index d1 = 2;
  Index d2 = 2;
  Matrix w2;
  Vector w1;
  Activation act = Activation::Tanh;
  Scalar r = 10.0;
  Scalar input_radius = 1.0;  // R1
  Scalar target_bound = 4.0;  // R2
  TailMode tail_mode = TailMode::Drop;

  /// Throws std::invalid_argument unless ||w1|| = 1 (within 1e-12), the
  /// smallest singular value of w2 is positive, and R1, R2, r > 0.
  void validate() const;
};

/// ModelConfig with identity-padded w2 (all singular values 1) and the
/// average-pooling w1 = (1/sqrt(d2), ..., 1/sqrt(d2)).
ModelConfig make_model_config(Index d1, Index d2, Activation act);

struct Sample {
  Vector x;
  Scalar y = 0.0;
};
using Batch = std::vector<Sample>;

/// Forward states and the step sizes that produced them. states[0] = w2 x,
/// states.size() == steps.size() + 1. block_order[l] is the index in the
/// *input* ensemble of the particle acting at step l (so gradients can be
/// mapped back through the sort); with TailMode::ExtendLast the last block
/// index appears twice.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Scalar> steps;
  std::vector<Index> block_order;
};

/// Costates p^0..p^n stored in forward index order; p^l = dE/dX^l for the
/// sample the trajectory belongs to.
struct AdjointTrajectory {
  std::vector<Vector> costates;
};

/// Batch-averaged gradients, indexed like the particles of the ensemble that
/// produced them (original storage order, not sorted order).
struct GradientRecord {
  std::vector<Matrix> dtheta;
  std::vector<Scalar> dtau;
  Scalar loss = 0.0;
};

/// Step sizes and acting block indices (into e's storage order) under the
/// given tail mode, sorting first when e.sorted is false. dtau^l =
/// tau^l - tau^{l-1} with virtual tau^{-1} = 0; ExtendLast appends a step of
/// size 1 - tau^{n-1} driven by the last block.
void plan_steps(const Ensemble& e, TailMode mode, std::vector<Scalar>& steps,
                std::vector<Index>& block_order);

/// Euler forward pass X^{l+1} = X^l + dtau^l sigma(theta^l X^l) through the
/// tau-sorted blocks, with dtau^0 = tau^0 - 0 (virtual tau^{-1} = 0). Sorts
/// the ensemble first if needed. Throws on dimension mismatch; a non-finite
/// state raises std::runtime_error naming the offending layer.
Trajectory forward(const Ensemble& e, const Vector& x, const ModelConfig& cfg);

/// Mean over the batch of (1/2)(<w1, X_final> - y)^2, summed in batch order.
Scalar loss(const Ensemble& e, const Batch& batch, const ModelConfig& cfg);

/// Exact reverse-mode pass through forward(): p^n = (<w1, X^n> - y) w1 and
/// p^l = p^{l+1} + dtau^l JacX_l^T p^{l+1}. This is the discrete adjoint of
/// the Euler scheme itself, not a separately discretized continuous adjoint.
AdjointTrajectory adjoint_backward(const Ensemble& e, const Trajectory& traj, Scalar y,
                                   const ModelConfig& cfg);

/// Batch-averaged dE/dtheta_i and dE/dtau_i for every particle. The sort is
/// treated as fixed during differentiation (it is piecewise constant in tau),
/// and results are mapped back to the particles' original positions.
GradientRecord gradients(const Ensemble& e, const Batch& batch, const ModelConfig& cfg);

}  // namespace meanfield
