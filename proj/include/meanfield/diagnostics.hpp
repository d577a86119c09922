#pragma once

#include "meanfield/dynamics.hpp"
#include "meanfield/rng.hpp"

#include <vector>

namespace meanfield {

/// L2-over-batch errors of the truncated shallow-ensemble expansions against
/// the exact forward map at one depth.
struct ExpansionReport {
  Index depth = 0;
  Scalar order0_err = 0.0;
  Scalar order1_err = 0.0;
  Scalar order2_err = 0.0;
};

/// Truncated expansion of the deep composition around X^0:
///   order 0: X^0
///   order 1: X^0 + sum_l dtau^l sigma(theta^l X^0)
///   order 2: adds sum_{b>a} dtau^b dtau^a diag(sigma'(theta^b X^0)) theta^b
///            sigma(theta^a X^0)
/// Order 2 requires a smooth activation; with ReLU it throws
/// std::invalid_argument (the expansion needs sigma').
Vector shallow_expand(const Ensemble& e, const Vector& x, const ModelConfig& cfg, int order);

ExpansionReport expansion_report(const Ensemble& e, const Batch& batch, const ModelConfig& cfg);

/// Depth sweep for the expansion-error decay: at each depth L builds a fresh
/// ensemble of L particles on the uniform grid (total mass 1) with theta
/// entries ~ Normal(0, theta_scale^2/d2), averages errors over seeds, and
/// fits the log-log slope of the order-1 error against L.
struct ExpansionSweep {
  std::vector<Index> depths;
  std::vector<Scalar> order1_err;  // seed-averaged, per depth
  std::vector<Scalar> order2_err;
  Scalar slope = 0.0;              // least-squares slope of log order1_err vs log L
  bool order2_below_order1 = false;
};

ExpansionSweep expansion_depth_sweep(const ModelConfig& cfg, const std::vector<Index>& depths,
                                     Index n_seeds, Index batch_size, Scalar theta_scale,
                                     std::uint64_t seed);

/// Empirical Theorem-1 probe. One Gaussian direction is drawn per call (for
/// each particle, d2 x d2 theta entries row-major, then one tau entry) and
/// rescaled to every requested scale, so the ratios converge as scale -> 0.
/// Scales whose perturbation is clamped away entirely (W2 = 0) are skipped
/// and recorded.
struct StabilityReport {
  std::vector<Scalar> scales;   // evaluated scales, in the order given
  std::vector<Scalar> ratios;   // max-over-batch ||dX(x,1)|| / W2
  std::vector<Scalar> skipped;  // scales with degenerate W2 = 0
  Scalar estimated_constant = 0.0;
};

StabilityReport stability_probe(const Ensemble& e, const Batch& batch, const ModelConfig& cfg,
                                const std::vector<Scalar>& scales, Rng& rng);

/// Boundedness verdict for a stability report: the ratios at the two
/// smallest evaluated scales agree within a factor of 2 and neither exceeds
/// 10x the ratio at the largest scale. Requires at least two evaluated
/// scales.
bool stability_bounded(const StabilityReport& report);

/// Discrete Gronwall form of the adjoint lower bound: with
/// Lbar = max over layers l and samples x of dtau^l ||JacX_l(x)||_F
/// (a Frobenius surrogate for the operator norm), the verdict asserts
/// min_l ||p^l||^2_mu >= exp(-2 Lbar) ||p^n||^2_mu. Note ||p^n||^2_mu = 2 E.
struct AdjointBoundReport {
  std::vector<Scalar> costate_sq_norms;  // ||p^l||^2_mu, forward index order
  Scalar loss_value = 0.0;
  Scalar lipschitz_bound = 0.0;  // Lbar
  bool verdict = false;
};

AdjointBoundReport adjoint_bound_check(const Ensemble& e, const Batch& batch,
                                       const ModelConfig& cfg);

/// The perturbation direction nu - rho produced by the descent probe: mass
/// moves from the block active at t_star onto the weighted candidates,
/// localized in time by a C^1 cubic bump phi of the given half width.
struct DescentDirection {
  std::vector<Matrix> candidate_thetas;
  Vector weights;       // simplex weights of the candidates
  Matrix active_theta;  // the block whose mass is displaced
  Index layer = 0;      // sorted layer index of t_star
  Scalar t_star = 0.0;
  Scalar half_width = 0.0;
};

struct DescentReport {
  DescentDirection direction;
  Scalar pairing = 0.0;       // <dE/drho, nu - rho> per unit mass displaced
  Scalar fit_residual = 0.0;  // ||A c - g|| over the pushforward batch
  Scalar target_norm = 0.0;   // ||g||
  bool fit_warning = false;
};

struct DescentOptions {
  Scalar half_width = 0.1;
  Scalar candidate_scale = 1.5;   // candidate theta magnitude (log-spread around it)
  Index ls_iterations = 4000;     // projected-gradient iterations for the simplex fit
  Scalar warn_residual_ratio = 0.5;
  std::vector<Matrix> candidates;  // overrides sampling when nonempty
};

/// Constructive probe for the descent-direction theorem: picks t_star inside
/// the widest sorted interval, fits simplex-weighted candidate blocks to
/// g(x) = -p(x, t_star) + sigma(theta^{l*} x) over the pushforward of the
/// batch, and reports the realized pairing (negative means descent). Throws
/// std::domain_error when the loss is below 1e-10 (already at a global
/// minimum).
DescentReport descent_probe(const Ensemble& e, const Batch& batch, const ModelConfig& cfg,
                            Index n_candidates, Rng& rng, const DescentOptions& opts = {});

/// Least-squares fit of log||f(x, lambda theta)|| against log lambda.
struct HomogeneityReport {
  std::vector<Scalar> lambdas;
  Scalar degree = 0.0;
  Scalar max_residual = 0.0;
};

/// Requires at least 3 positive lambdas; throws std::domain_error when the
/// block output vanishes at some lambda (degree undefined).
HomogeneityReport homogeneity_degree(const ModelConfig& cfg, const Vector& x,
                                     const Matrix& theta, const std::vector<Scalar>& lambdas);

/// Central finite differences of loss() on every coordinate of every theta_i
/// and tau_i against gradients(). Returns the max relative error with the
/// convention |a - n| / max(1, |a|, |n|).
Scalar grad_check(const Ensemble& e, const Batch& batch, const ModelConfig& cfg, Scalar h);

}  // namespace meanfield
