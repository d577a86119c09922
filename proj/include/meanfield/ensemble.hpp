#pragma once

#include "meanfield/rng.hpp"
#include "meanfield/types.hpp"

#include <cstdint>
#include <vector>

namespace meanfield {

/// One residual block regarded as a point mass of the empirical parameter
/// distribution: a weight matrix theta (d2 x d2) and a time stamp tau in
/// [0, 1]. The id tag is stable across sorting and is used to break tau ties
/// deterministically.
struct Particle {
  Matrix theta;
  Scalar tau = 0.0;
  std::int64_t id = 0;
};

/// Ordered collection of particles. `sorted` means taus are nondecreasing
/// with ties broken by ascending id. Operations below return new ensembles;
/// values are safe to share.
struct Ensemble {
  std::vector<Particle> particles;
  bool sorted = false;

  Index size() const { return static_cast<Index>(particles.size()); }
  /// Block dimension d2, or 0 for an empty ensemble.
  Index dim() const { return particles.empty() ? 0 : particles.front().theta.rows(); }
};

/// Indices that put the particles in nondecreasing tau order, ties by id.
std::vector<Index> sort_permutation(const Ensemble& e);

/// Sorts by (tau, id). Idempotent; never changes the particle multiset.
Ensemble sort_by_tau(const Ensemble& e);

/// Projects every particle into Q_r: thetas with Frobenius norm above r are
/// rescaled onto the sphere of radius r, taus are clamped into [0, 1].
Ensemble clamp_to_q_r(const Ensemble& e, Scalar r);

/// Equal-weight assignment between two point clouds of the same size.
/// assignment[i] is the index in b matched to particle i of a; cost is the
/// total squared ground cost of the matching (no 1/n factor).
struct TransportPlan {
  std::vector<Index> assignment;
  Scalar cost = 0.0;
};

struct W2Result {
  Scalar dist = 0.0;
  TransportPlan plan;
};

/// Exact Wasserstein-2 distance between two equal-count, equal-dimension
/// ensembles, solved as an optimal assignment on the squared product metric
/// d^2 = ||dtheta||_F^2 + (tau_scale * dtau)^2. dist^2 is the mean matched
/// cost (1/n sum). Throws std::invalid_argument for unequal counts or
/// dimensions or empty inputs; unequal weights are out of scope.
W2Result w2_distance(const Ensemble& a, const Ensemble& b, Scalar tau_scale = 1.0);

/// tau grid (1/n, 2/n, ..., 1).
std::vector<Scalar> uniform_grid_taus(Index n);

/// n iid Uniform[0,1] draws, returned sorted.
std::vector<Scalar> draw_uniform_taus(Index n, Rng& rng);

/// Ensemble with theta entries iid Normal(0, entry_std^2), drawn particle by
/// particle in row-major order, taus as given, ids 0..n-1 in order.
Ensemble gaussian_ensemble(Index d2, Scalar entry_std, const std::vector<Scalar>& taus,
                           Rng& rng);

}  // namespace meanfield
