#include "meanfield/diagnostics.hpp"

#include "meanfield/data.hpp"
#include "meanfield/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace meanfield {

namespace {

std::pair<Scalar, Scalar> fit_line(const std::vector<Scalar>& xs,
                                   const std::vector<Scalar>& ys) {
  const Scalar n = static_cast<Scalar>(xs.size());
  Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const Scalar slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const Scalar intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

}  // namespace

Vector shallow_expand(const Ensemble& e, const Vector& x, const ModelConfig& cfg, int order) {
  if (order < 0 || order > 2)
    throw std::invalid_argument("expansion order must be 0, 1 or 2");
  if (order >= 2 && !is_smooth(cfg.act))
    throw std::invalid_argument(
        "order-2 expansion requires a smooth activation (ReLU has no usable sigma')");

  std::vector<Scalar> steps;
  std::vector<Index> blocks;
  plan_steps(e, cfg.tail_mode, steps, blocks);
  const std::size_t m = steps.size();

  const Vector x0 = matvec(cfg.w2, x);
  Vector out = x0;
  if (order == 0) return out;

  std::vector<Vector> sig(m);
  for (std::size_t l = 0; l < m; ++l) {
    const Matrix& theta = e.particles[static_cast<std::size_t>(blocks[l])].theta;
    sig[l] = apply_block(theta, x0, cfg.act);
    out += steps[l] * sig[l];
  }
  if (order == 1) return out;

  for (std::size_t b = 1; b < m; ++b) {
    const Matrix& theta_b = e.particles[static_cast<std::size_t>(blocks[b])].theta;
    const Vector dsig_b = apply_activation_derivative(cfg.act, matvec(theta_b, x0));
    for (std::size_t a = 0; a < b; ++a)
      out += steps[b] * steps[a] * dsig_b.cwiseProduct(matvec(theta_b, sig[a]));
  }
  return out;
}

ExpansionReport expansion_report(const Ensemble& e, const Batch& batch,
                                 const ModelConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("expansion_report requires a nonempty batch");
  ExpansionReport rep;
  rep.depth = e.size();
  Scalar sq0 = 0, sq1 = 0, sq2 = 0;
  for (const Sample& s : batch) {
    const Vector exact = forward(e, s.x, cfg).states.back();
    sq0 += (shallow_expand(e, s.x, cfg, 0) - exact).squaredNorm();
    sq1 += (shallow_expand(e, s.x, cfg, 1) - exact).squaredNorm();
    sq2 += (shallow_expand(e, s.x, cfg, 2) - exact).squaredNorm();
  }
  const Scalar inv_b = 1.0 / static_cast<Scalar>(batch.size());
  rep.order0_err = std::sqrt(sq0 * inv_b);
  rep.order1_err = std::sqrt(sq1 * inv_b);
  rep.order2_err = std::sqrt(sq2 * inv_b);
  return rep;
}

ExpansionSweep expansion_depth_sweep(const ModelConfig& cfg, const std::vector<Index>& depths,
                                     Index n_seeds, Index batch_size, Scalar theta_scale,
                                     std::uint64_t seed) {
  if (depths.size() < 2) throw std::invalid_argument("depth sweep needs at least 2 depths");
  if (n_seeds < 1 || batch_size < 1)
    throw std::invalid_argument("depth sweep needs n_seeds >= 1 and batch_size >= 1");

  ExpansionSweep sweep;
  sweep.depths = depths;
  const Scalar entry_std = theta_scale / std::sqrt(static_cast<Scalar>(cfg.d2));

  for (std::size_t di = 0; di < depths.size(); ++di) {
    const Index depth = depths[di];
    Scalar avg1 = 0, avg2 = 0;
    for (Index s = 0; s < n_seeds; ++s) {
      Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(s) * 1000 +
                                    static_cast<std::uint64_t>(depth)));
      const Ensemble e = gaussian_ensemble(cfg.d2, entry_std, uniform_grid_taus(depth), rng);
      Batch batch(static_cast<std::size_t>(batch_size));
      for (Sample& sm : batch) sm.x = sample_in_ball(cfg.d1, cfg.input_radius, rng);
      const ExpansionReport rep = expansion_report(e, batch, cfg);
      avg1 += rep.order1_err;
      avg2 += rep.order2_err;
    }
    sweep.order1_err.push_back(avg1 / static_cast<Scalar>(n_seeds));
    sweep.order2_err.push_back(avg2 / static_cast<Scalar>(n_seeds));
  }

  std::vector<Scalar> log_l, log_e;
  for (std::size_t i = 0; i < depths.size(); ++i) {
    log_l.push_back(std::log(static_cast<Scalar>(depths[i])));
    log_e.push_back(std::log(sweep.order1_err[i]));
  }
  sweep.slope = fit_line(log_l, log_e).first;
  sweep.order2_below_order1 = true;
  for (std::size_t i = 0; i < depths.size(); ++i)
    if (!(sweep.order2_err[i] < sweep.order1_err[i])) sweep.order2_below_order1 = false;
  return sweep;
}

StabilityReport stability_probe(const Ensemble& e, const Batch& batch, const ModelConfig& cfg,
                                const std::vector<Scalar>& scales, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("stability_probe requires a nonempty batch");
  if (e.size() == 0) throw std::invalid_argument("stability_probe requires particles");

  // One direction per call, rescaled below.
  std::vector<Matrix> dir_theta;
  std::vector<Scalar> dir_tau;
  for (const Particle& p : e.particles) {
    Matrix d(p.theta.rows(), p.theta.cols());
    rng.fill_normal(d, 1.0);
    dir_theta.push_back(std::move(d));
    dir_tau.push_back(rng.normal());
  }

  std::vector<Vector> base_out;
  base_out.reserve(batch.size());
  for (const Sample& s : batch) base_out.push_back(forward(e, s.x, cfg).states.back());

  StabilityReport rep;
  for (Scalar scale : scales) {
    Ensemble perturbed = e;
    for (std::size_t i = 0; i < perturbed.particles.size(); ++i) {
      perturbed.particles[i].theta += scale * dir_theta[i];
      perturbed.particles[i].tau += scale * dir_tau[i];
    }
    perturbed.sorted = false;
    perturbed = clamp_to_q_r(perturbed, cfg.r);

    const Scalar w2 = w2_distance(e, perturbed).dist;
    if (!(w2 > 0)) {
      rep.skipped.push_back(scale);
      continue;
    }
    Scalar max_dx = 0;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const Vector out = forward(perturbed, batch[k].x, cfg).states.back();
      max_dx = std::max(max_dx, (out - base_out[k]).norm());
    }
    rep.scales.push_back(scale);
    rep.ratios.push_back(max_dx / w2);
  }
  rep.estimated_constant =
      rep.ratios.empty() ? 0.0 : *std::max_element(rep.ratios.begin(), rep.ratios.end());
  return rep;
}

bool stability_bounded(const StabilityReport& report) {
  if (report.ratios.size() < 2) return false;
  std::vector<std::size_t> idx(report.scales.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return report.scales[a] > report.scales[b]; });
  const Scalar largest = report.ratios[idx.front()];
  const Scalar small1 = report.ratios[idx[idx.size() - 1]];
  const Scalar small2 = report.ratios[idx[idx.size() - 2]];
  const Scalar lo = std::min(small1, small2);
  const Scalar hi = std::max(small1, small2);
  return hi <= 2.0 * lo && hi <= 10.0 * largest;
}

AdjointBoundReport adjoint_bound_check(const Ensemble& e, const Batch& batch,
                                       const ModelConfig& cfg) {
  if (batch.empty())
    throw std::invalid_argument("adjoint_bound_check requires a nonempty batch");

  AdjointBoundReport rep;
  std::size_t m = 0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Trajectory traj = forward(e, batch[k].x, cfg);
    const AdjointTrajectory adj = adjoint_backward(e, traj, batch[k].y, cfg);
    if (k == 0) {
      m = traj.steps.size();
      rep.costate_sq_norms.assign(m + 1, 0.0);
    }
    for (std::size_t l = 0; l <= m; ++l)
      rep.costate_sq_norms[l] += adj.costates[l].squaredNorm();
    const Scalar err = cfg.w1.dot(traj.states.back()) - batch[k].y;
    rep.loss_value += 0.5 * err * err;

    for (std::size_t l = 0; l < m; ++l) {
      const Particle& p = e.particles[static_cast<std::size_t>(traj.block_order[l])];
      const BlockJacobians jac = block_jacobians(p.theta, traj.states[l], cfg.act);
      rep.lipschitz_bound =
          std::max(rep.lipschitz_bound, std::abs(traj.steps[l]) * jac.jac_x.norm());
    }
  }
  const Scalar inv_b = 1.0 / static_cast<Scalar>(batch.size());
  for (Scalar& v : rep.costate_sq_norms) v *= inv_b;
  rep.loss_value *= inv_b;

  const Scalar floor = std::exp(-2.0 * rep.lipschitz_bound) * rep.costate_sq_norms.back();
  rep.verdict = true;
  for (Scalar v : rep.costate_sq_norms)
    if (!(v >= floor)) rep.verdict = false;
  return rep;
}

namespace {

// C^1 cubic bump h(u) = 2|u|^3 - 3u^2 + 1 on |u| <= 1 with integral 1 over
// [-1, 1]; H is its antiderivative with H(0) = 0.
Scalar bump_antiderivative(Scalar u) {
  u = std::clamp(u, -1.0, 1.0);
  const Scalar a = std::abs(u);
  const Scalar h = a * a * a * a / 2.0 - a * a * a + a;
  return u >= 0 ? h : -h;
}

// Integral over [t1, t2] of the bump centered at t_star with the given half
// width, normalized so the part inside [0, 1] integrates to one.
Scalar bump_mass(Scalar t1, Scalar t2, Scalar t_star, Scalar half_width) {
  const auto to_u = [&](Scalar t) { return (t - t_star) / half_width; };
  const Scalar z =
      bump_antiderivative(to_u(1.0)) - bump_antiderivative(to_u(0.0));
  if (!(z > 0)) throw std::invalid_argument("descent bump has no mass inside (0, 1)");
  return (bump_antiderivative(to_u(t2)) - bump_antiderivative(to_u(t1))) / z;
}

// Euclidean projection onto the probability simplex (sort-based).
Vector project_simplex(const Vector& v) {
  const Index n = v.size();
  std::vector<Scalar> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cum = 0, theta = 0;
  Index rho = 0;
  for (Index i = 0; i < n; ++i) {
    cum += u[static_cast<std::size_t>(i)];
    const Scalar t = (cum - 1.0) / static_cast<Scalar>(i + 1);
    if (u[static_cast<std::size_t>(i)] - t > 0) {
      rho = i;
      theta = t;
    }
  }
  (void)rho;
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

// min_{c in simplex} ||A c - b||^2 by FISTA with a power-iteration step size.
Vector simplex_least_squares(const Matrix& a, const Vector& b, Index iterations) {
  const Index j = a.cols();
  const Matrix gram = a.transpose() * a;
  const Vector lin = a.transpose() * b;

  Vector pw = Vector::Constant(j, 1.0 / std::sqrt(static_cast<Scalar>(j)));
  Scalar lmax = 1.0;
  for (int it = 0; it < 100; ++it) {
    Vector next = gram * pw;
    const Scalar norm = next.norm();
    if (norm == 0) break;
    lmax = norm;
    pw = next / norm;
  }
  const Scalar step = 1.0 / std::max(lmax, 1e-12);

  Vector c = Vector::Constant(j, 1.0 / static_cast<Scalar>(j));
  Vector y = c;
  Scalar t = 1.0;
  for (Index it = 0; it < iterations; ++it) {
    const Vector c_next = project_simplex(y - step * (gram * y - lin));
    const Scalar t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = c_next + ((t - 1.0) / t_next) * (c_next - c);
    c = c_next;
    t = t_next;
  }
  return c;
}

}  // namespace

DescentReport descent_probe(const Ensemble& e, const Batch& batch, const ModelConfig& cfg,
                            Index n_candidates, Rng& rng, const DescentOptions& opts) {
  if (batch.empty()) throw std::invalid_argument("descent_probe requires a nonempty batch");
  if (e.size() == 0) throw std::invalid_argument("descent_probe requires particles");
  if (n_candidates < 1 && opts.candidates.empty())
    throw std::invalid_argument("descent_probe requires candidates");

  const Scalar current_loss = loss(e, batch, cfg);
  if (current_loss < 1e-10)
    throw std::domain_error("already at global minimum (loss < 1e-10)");

  Ensemble sorted = sort_by_tau(e);
  std::vector<Scalar> steps;
  std::vector<Index> blocks;
  plan_steps(sorted, cfg.tail_mode, steps, blocks);
  const std::size_t m = steps.size();
  const Index d2 = cfg.d2;

  // Widest interval = most local particle mass; t_star is its midpoint.
  const std::size_t l_star = static_cast<std::size_t>(
      std::max_element(steps.begin(), steps.end()) - steps.begin());
  Scalar interval_start = 0.0;
  for (std::size_t l = 0; l < l_star; ++l) interval_start += steps[l];
  const Scalar t_star = interval_start + 0.5 * steps[l_star];
  const Matrix& active_theta =
      sorted.particles[static_cast<std::size_t>(blocks[l_star])].theta;

  // Forward/adjoint pass per sample; target g_k = -p^{l*+1} + sigma(theta^{l*} xi_k)
  // over the pushforward states xi_k = X^{l*}(x_k).
  const std::size_t b_count = batch.size();
  std::vector<Trajectory> trajs(b_count);
  std::vector<AdjointTrajectory> adjs(b_count);
  Vector target(static_cast<Index>(b_count) * d2);
  for (std::size_t k = 0; k < b_count; ++k) {
    trajs[k] = forward(sorted, batch[k].x, cfg);
    adjs[k] = adjoint_backward(sorted, trajs[k], batch[k].y, cfg);
    const Vector g = -adjs[k].costates[l_star + 1] +
                     apply_block(active_theta, trajs[k].states[l_star], cfg.act);
    target.segment(static_cast<Index>(k) * d2, d2) = g;
  }

  // Candidate dictionary: Gaussian blocks with log-spread magnitudes.
  std::vector<Matrix> candidates = opts.candidates;
  if (candidates.empty()) {
    candidates.reserve(static_cast<std::size_t>(n_candidates));
    for (Index jc = 0; jc < n_candidates; ++jc) {
      const Scalar mag = opts.candidate_scale * std::pow(3.0, rng.uniform(-1.0, 1.0));
      Matrix cand(d2, d2);
      rng.fill_normal(cand, mag / std::sqrt(static_cast<Scalar>(d2)));
      candidates.push_back(std::move(cand));
    }
  }
  const Index j_count = static_cast<Index>(candidates.size());

  // Least squares in the empirical pushforward norm (1/sqrt(B) row scaling).
  const Scalar row_scale = 1.0 / std::sqrt(static_cast<Scalar>(b_count));
  Matrix a(static_cast<Index>(b_count) * d2, j_count);
  for (Index jc = 0; jc < j_count; ++jc)
    for (std::size_t k = 0; k < b_count; ++k)
      a.block(static_cast<Index>(k) * d2, jc, d2, 1) =
          row_scale *
          apply_block(candidates[static_cast<std::size_t>(jc)], trajs[k].states[l_star], cfg.act);
  const Vector b_vec = row_scale * target;

  const Vector weights = simplex_least_squares(a, b_vec, opts.ls_iterations);

  DescentReport rep;
  rep.fit_residual = (a * weights - b_vec).norm();
  rep.target_norm = b_vec.norm();
  rep.fit_warning = rep.fit_residual > opts.warn_residual_ratio * std::max(rep.target_norm, 1e-12);

  // Pairing <dE/drho, nu - rho>: per layer l the phi-mass of its interval
  // times mean_x <sigma(theta X^l), p^{l+1}> evaluated at the weighted
  // candidates minus the active block at t_star.
  Scalar pairing = 0.0;
  Scalar t_lo = 0.0;
  for (std::size_t l = 0; l < m; ++l) {
    const Scalar t_hi = l + 1 == m && cfg.tail_mode == TailMode::ExtendLast ? 1.0 : t_lo + steps[l];
    const Scalar mass = bump_mass(t_lo, t_hi, t_star, opts.half_width);
    t_lo = t_hi;
    if (mass == 0.0) continue;

    Scalar layer_term = 0.0;
    for (std::size_t k = 0; k < b_count; ++k) {
      const Vector& state = trajs[k].states[l];
      const Vector& costate = adjs[k].costates[l + 1];
      Scalar mix = 0.0;
      for (Index jc = 0; jc < j_count; ++jc) {
        if (weights[jc] == 0.0) continue;
        mix += weights[jc] *
               costate.dot(apply_block(candidates[static_cast<std::size_t>(jc)], state, cfg.act));
      }
      layer_term += mix - costate.dot(apply_block(active_theta, state, cfg.act));
    }
    pairing += mass * layer_term / static_cast<Scalar>(b_count);
  }

  rep.pairing = pairing;
  rep.direction.candidate_thetas = std::move(candidates);
  rep.direction.weights = weights;
  rep.direction.active_theta = active_theta;
  rep.direction.layer = static_cast<Index>(l_star);
  rep.direction.t_star = t_star;
  rep.direction.half_width = opts.half_width;
  return rep;
}

HomogeneityReport homogeneity_degree(const ModelConfig& cfg, const Vector& x,
                                     const Matrix& theta, const std::vector<Scalar>& lambdas) {
  if (lambdas.size() < 3)
    throw std::invalid_argument("homogeneity fit needs at least 3 scale factors");
  for (Scalar l : lambdas)
    if (!(l > 0)) throw std::invalid_argument("scale factors must be positive");

  std::vector<Scalar> log_l, log_f;
  for (Scalar lam : lambdas) {
    const Scalar norm = apply_block(Matrix(lam * theta), x, cfg.act).norm();
    if (!(norm > 0))
      throw std::domain_error("block output vanishes; homogeneity degree undefined");
    log_l.push_back(std::log(lam));
    log_f.push_back(std::log(norm));
  }
  const auto [slope, intercept] = fit_line(log_l, log_f);

  HomogeneityReport rep;
  rep.lambdas = lambdas;
  rep.degree = slope;
  for (std::size_t i = 0; i < log_l.size(); ++i)
    rep.max_residual =
        std::max(rep.max_residual, std::abs(log_f[i] - (intercept + slope * log_l[i])));
  return rep;
}

Scalar grad_check(const Ensemble& e, const Batch& batch, const ModelConfig& cfg, Scalar h) {
  if (!(h > 0)) throw std::invalid_argument("grad_check step must be positive");
  const GradientRecord analytic = gradients(e, batch, cfg);

  Ensemble work = e;
  work.sorted = false;  // perturbed taus may reorder; always re-sort
  Scalar max_rel = 0.0;

  const auto central = [&](Scalar& coord) {
    const Scalar saved = coord;
    coord = saved + h;
    const Scalar up = loss(work, batch, cfg);
    coord = saved - h;
    const Scalar down = loss(work, batch, cfg);
    coord = saved;
    return (up - down) / (2.0 * h);
  };
  const auto rel_err = [](Scalar a, Scalar n) {
    return std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
  };

  for (std::size_t i = 0; i < work.particles.size(); ++i) {
    Matrix& theta = work.particles[i].theta;
    for (Index r = 0; r < theta.rows(); ++r)
      for (Index c = 0; c < theta.cols(); ++c)
        max_rel = std::max(max_rel, rel_err(analytic.dtheta[i](r, c), central(theta(r, c))));
    max_rel = std::max(max_rel, rel_err(analytic.dtau[i], central(work.particles[i].tau)));
  }
  return max_rel;
}

}  // namespace meanfield
