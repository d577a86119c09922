#include "meanfield/dynamics.hpp"

#include "meanfield/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace meanfield {

std::string to_string(TailMode mode) {
  return mode == TailMode::Drop ? "drop" : "extend_last";
}

TailMode parse_tail_mode(const std::string& name) {
  if (name == "drop") return TailMode::Drop;
  if (name == "extend_last") return TailMode::ExtendLast;
  throw std::invalid_argument("unknown tail_mode: '" + name + "'");
}

void ModelConfig::validate() const {
  if (d1 <= 0 || d2 <= 0) throw std::invalid_argument("model dimensions must be positive");
  if (w1.size() != d2)
    throw std::invalid_argument("w1 must have dimension d2 = " + std::to_string(d2));
  if (std::abs(w1.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("w1 must have unit norm (|norm - 1| <= 1e-12)");
  if (w2.rows() != d2 || w2.cols() != d1)
    throw std::invalid_argument("w2 must be d2 x d1 = " + std::to_string(d2) + "x" +
                                std::to_string(d1));
  Eigen::JacobiSVD<Matrix> svd(w2);
  if (!(svd.singularValues().minCoeff() > 0))
    throw std::invalid_argument("w2 must have strictly positive singular values");
  if (!(r > 0)) throw std::invalid_argument("clamp radius r must be positive");
  if (!(input_radius > 0)) throw std::invalid_argument("R1 must be positive");
  if (!(target_bound > 0)) throw std::invalid_argument("R2 must be positive");
}

ModelConfig make_model_config(Index d1, Index d2, Activation act) {
  ModelConfig cfg;
  cfg.d1 = d1;
  cfg.d2 = d2;
  cfg.act = act;
  cfg.w2 = Matrix::Zero(d2, d1);
  for (Index i = 0; i < std::min(d1, d2); ++i) cfg.w2(i, i) = 1.0;
  cfg.w1 = Vector::Constant(d2, 1.0 / std::sqrt(static_cast<Scalar>(d2)));
  cfg.w1 /= cfg.w1.norm();
  cfg.validate();
  return cfg;
}

namespace {

std::vector<Index> identity_order(Index n) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  return order;
}

}  // namespace

void plan_steps(const Ensemble& e, TailMode mode, std::vector<Scalar>& steps,
                std::vector<Index>& block_order) {
  const std::vector<Index> order = e.sorted ? identity_order(e.size()) : sort_permutation(e);
  steps.clear();
  block_order.clear();
  Scalar prev_tau = 0.0;
  for (Index idx : order) {
    const Particle& p = e.particles[static_cast<std::size_t>(idx)];
    steps.push_back(p.tau - prev_tau);
    block_order.push_back(idx);
    prev_tau = p.tau;
  }
  if (mode == TailMode::ExtendLast && !order.empty()) {
    steps.push_back(1.0 - prev_tau);
    block_order.push_back(order.back());
  }
}

Trajectory forward(const Ensemble& e, const Vector& x, const ModelConfig& cfg) {
  Trajectory traj;
  plan_steps(e, cfg.tail_mode, traj.steps, traj.block_order);

  Vector state = matvec(cfg.w2, x);
  if (!state.allFinite()) throw std::runtime_error("non-finite state at input layer");
  traj.states.reserve(traj.steps.size() + 1);
  traj.states.push_back(state);
  for (std::size_t l = 0; l < traj.steps.size(); ++l) {
    const Particle& p = e.particles[static_cast<std::size_t>(traj.block_order[l])];
    state += traj.steps[l] * apply_block(p.theta, state, cfg.act);
    if (!state.allFinite())
      throw std::runtime_error("non-finite state at layer " + std::to_string(l));
    traj.states.push_back(state);
  }
  return traj;
}

Scalar loss(const Ensemble& e, const Batch& batch, const ModelConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("loss requires a nonempty batch");
  Scalar acc = 0.0;
  for (const Sample& s : batch) {
    const Trajectory traj = forward(e, s.x, cfg);
    const Scalar err = cfg.w1.dot(traj.states.back()) - s.y;
    acc += 0.5 * err * err;
  }
  return acc / static_cast<Scalar>(batch.size());
}

AdjointTrajectory adjoint_backward(const Ensemble& e, const Trajectory& traj, Scalar y,
                                   const ModelConfig& cfg) {
  const std::size_t m = traj.steps.size();
  if (traj.states.size() != m + 1 || traj.block_order.size() != m)
    throw std::invalid_argument("trajectory is inconsistent (states/steps/block_order)");
  for (Index idx : traj.block_order)
    if (idx < 0 || idx >= e.size())
      throw std::invalid_argument("trajectory block_order does not match ensemble size");

  AdjointTrajectory adj;
  adj.costates.assign(m + 1, Vector());
  adj.costates[m] = (cfg.w1.dot(traj.states[m]) - y) * cfg.w1;
  for (std::size_t l = m; l-- > 0;) {
    const Particle& p = e.particles[static_cast<std::size_t>(traj.block_order[l])];
    const Vector pre = matvec(p.theta, traj.states[l]);
    const Vector w = adj.costates[l + 1].cwiseProduct(apply_activation_derivative(cfg.act, pre));
    adj.costates[l] = adj.costates[l + 1] + traj.steps[l] * (p.theta.transpose() * w);
  }
  return adj;
}

GradientRecord gradients(const Ensemble& e, const Batch& batch, const ModelConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("gradients requires a nonempty batch");

  const std::vector<Index> perm = sort_permutation(e);
  Ensemble sorted;
  sorted.particles.reserve(e.particles.size());
  for (Index i : perm) sorted.particles.push_back(e.particles[static_cast<std::size_t>(i)]);
  sorted.sorted = true;

  const Index n = e.size();
  const std::size_t m =
      static_cast<std::size_t>(n) + (cfg.tail_mode == TailMode::ExtendLast && n > 0 ? 1 : 0);

  std::vector<Matrix> dtheta(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j)
    dtheta[static_cast<std::size_t>(j)] =
        Matrix::Zero(sorted.particles[static_cast<std::size_t>(j)].theta.rows(),
                     sorted.particles[static_cast<std::size_t>(j)].theta.cols());
  std::vector<Scalar> dstep(m, 0.0);
  Scalar total_loss = 0.0;

  for (const Sample& s : batch) {
    const Trajectory traj = forward(sorted, s.x, cfg);
    const Scalar err = cfg.w1.dot(traj.states.back()) - s.y;
    total_loss += 0.5 * err * err;

    // Backward sweep; p starts as the terminal costate and the per-layer
    // contributions of Theorem 2's particle form accumulate on the way down.
    Vector p = err * cfg.w1;
    for (std::size_t l = m; l-- > 0;) {
      const Index j = traj.block_order[l];
      const Particle& part = sorted.particles[static_cast<std::size_t>(j)];
      const Vector pre = matvec(part.theta, traj.states[l]);
      dstep[l] += p.dot(apply_activation(cfg.act, pre));
      const Vector w = p.cwiseProduct(apply_activation_derivative(cfg.act, pre));
      dtheta[static_cast<std::size_t>(j)] += traj.steps[l] * (w * traj.states[l].transpose());
      p += traj.steps[l] * (part.theta.transpose() * w);
    }
  }

  const Scalar inv_b = 1.0 / static_cast<Scalar>(batch.size());
  total_loss *= inv_b;
  for (Matrix& g : dtheta) g *= inv_b;
  for (Scalar& g : dstep) g *= inv_b;

  // dtau^j: dtau appears with +1 in step j and -1 in step j+1 (the tail step,
  // when present, depends on tau^{n-1} with slope -1, same pattern).
  std::vector<Scalar> dtau(static_cast<std::size_t>(n), 0.0);
  for (Index j = 0; j < n; ++j) {
    const std::size_t sj = static_cast<std::size_t>(j);
    dtau[sj] = dstep[sj] - (sj + 1 < m ? dstep[sj + 1] : 0.0);
  }

  GradientRecord rec;
  rec.loss = total_loss;
  rec.dtheta.assign(static_cast<std::size_t>(n), Matrix());
  rec.dtau.assign(static_cast<std::size_t>(n), 0.0);
  for (Index j = 0; j < n; ++j) {
    const std::size_t orig = static_cast<std::size_t>(perm[static_cast<std::size_t>(j)]);
    if (!dtheta[static_cast<std::size_t>(j)].allFinite() ||
        !std::isfinite(dtau[static_cast<std::size_t>(j)]))
      throw std::runtime_error("non-finite gradient for particle " + std::to_string(orig));
    rec.dtheta[orig] = std::move(dtheta[static_cast<std::size_t>(j)]);
    rec.dtau[orig] = dtau[static_cast<std::size_t>(j)];
  }
  return rec;
}

}  // namespace meanfield
