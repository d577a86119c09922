#include "meanfield/ensemble.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace meanfield {

std::vector<Index> sort_permutation(const Ensemble& e) {
  std::vector<Index> perm(e.particles.size());
  std::iota(perm.begin(), perm.end(), Index{0});
  std::sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    const Particle& pa = e.particles[static_cast<std::size_t>(a)];
    const Particle& pb = e.particles[static_cast<std::size_t>(b)];
    if (pa.tau != pb.tau) return pa.tau < pb.tau;
    return pa.id < pb.id;
  });
  return perm;
}

Ensemble sort_by_tau(const Ensemble& e) {
  const std::vector<Index> perm = sort_permutation(e);
  Ensemble out;
  out.particles.reserve(e.particles.size());
  for (Index i : perm) out.particles.push_back(e.particles[static_cast<std::size_t>(i)]);
  out.sorted = true;
  return out;
}

Ensemble clamp_to_q_r(const Ensemble& e, Scalar r) {
  if (!(r > 0)) throw std::invalid_argument("clamp radius must be positive");
  Ensemble out = e;
  for (Particle& p : out.particles) {
    // Repeat until the recomputed norm is within the ball, so the projection
    // is exactly idempotent (one rescale can land an ulp above r).
    for (Scalar norm = p.theta.norm(); norm > r; norm = p.theta.norm())
      p.theta *= r / norm;
    p.tau = std::min(std::max(p.tau, 0.0), 1.0);
  }
  return out;
}

namespace {

// Hungarian algorithm with potentials (shortest augmenting paths), O(n^3).
// Indices are 1-based internally; column 0 is the virtual start.
std::vector<Index> solve_assignment(const Matrix& cost) {
  const Index n = cost.rows();
  constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Index> matched_row(n + 1, 0), way(n + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    matched_row[0] = i;
    Index j0 = 0;
    std::vector<Scalar> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = matched_row[j0];
      Index j1 = 0;
      Scalar delta = kInf;
      for (Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[matched_row[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (matched_row[j0] != 0);
    do {
      const Index j1 = way[j0];
      matched_row[j0] = matched_row[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> row_to_col(n);
  for (Index j = 1; j <= n; ++j) row_to_col[matched_row[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

W2Result w2_distance(const Ensemble& a, const Ensemble& b, Scalar tau_scale) {
  const Index n = a.size();
  if (n != b.size())
    throw std::invalid_argument("w2_distance requires equal particle counts, got " +
                                std::to_string(n) + " and " + std::to_string(b.size()) +
                                " (unequal-weight transport is out of scope)");
  if (n == 0) throw std::invalid_argument("w2_distance requires at least one particle");
  if (a.dim() != b.dim())
    throw std::invalid_argument("w2_distance dimension mismatch: " + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()));

  Matrix cost(n, n);
  for (Index i = 0; i < n; ++i) {
    const Particle& pa = a.particles[static_cast<std::size_t>(i)];
    for (Index j = 0; j < n; ++j) {
      const Particle& pb = b.particles[static_cast<std::size_t>(j)];
      const Scalar dtau = tau_scale * (pa.tau - pb.tau);
      cost(i, j) = (pa.theta - pb.theta).squaredNorm() + dtau * dtau;
    }
  }

  W2Result res;
  res.plan.assignment = solve_assignment(cost);
  Scalar total = 0.0;
  for (Index i = 0; i < n; ++i) total += cost(i, res.plan.assignment[static_cast<std::size_t>(i)]);
  res.plan.cost = total;
  res.dist = std::sqrt(total / static_cast<Scalar>(n));
  return res;
}

std::vector<Scalar> uniform_grid_taus(Index n) {
  std::vector<Scalar> taus(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    taus[static_cast<std::size_t>(i)] = static_cast<Scalar>(i + 1) / static_cast<Scalar>(n);
  return taus;
}

std::vector<Scalar> draw_uniform_taus(Index n, Rng& rng) {
  std::vector<Scalar> taus(static_cast<std::size_t>(n));
  for (Scalar& t : taus) t = rng.uniform01();
  std::sort(taus.begin(), taus.end());
  return taus;
}

Ensemble gaussian_ensemble(Index d2, Scalar entry_std, const std::vector<Scalar>& taus,
                           Rng& rng) {
  Ensemble e;
  e.particles.reserve(taus.size());
  std::int64_t id = 0;
  for (Scalar tau : taus) {
    Particle p;
    p.theta = Matrix(d2, d2);
    rng.fill_normal(p.theta, entry_std);
    p.tau = tau;
    p.id = id++;
    e.particles.push_back(std::move(p));
  }
  e.sorted = std::is_sorted(taus.begin(), taus.end());
  return e;
}

}  // namespace meanfield
