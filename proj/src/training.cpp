#include "meanfield/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace meanfield {

std::string to_string(TrainMode m) { return m == TrainMode::MeanField ? "meanfield" : "vanilla"; }

TrainMode parse_train_mode(const std::string& name) {
  if (name == "meanfield") return TrainMode::MeanField;
  if (name == "vanilla") return TrainMode::Vanilla;
  throw std::invalid_argument("unknown mode: '" + name + "'");
}

std::string to_string(TauInit t) {
  return t == TauInit::UniformGrid ? "uniform_grid" : "uniform_random";
}

TauInit parse_tau_init(const std::string& name) {
  if (name == "uniform_grid") return TauInit::UniformGrid;
  if (name == "uniform_random") return TauInit::UniformRandom;
  throw std::invalid_argument("unknown tau_init: '" + name + "'");
}

void TrainConfig::validate() const {
  if (n_particles < 1) throw std::invalid_argument("n_particles must be >= 1");
  if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
  if (!(momentum >= 0 && momentum < 1))
    throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(theta_init_scale >= 0)) throw std::invalid_argument("theta_init_scale must be >= 0");
  if (!(clamp_r > 0)) throw std::invalid_argument("clamp_r must be positive");
  if (!(tau_lr_scale >= 0)) throw std::invalid_argument("tau_lr_scale must be >= 0");
  if (!(eval_fraction >= 0 && eval_fraction < 1))
    throw std::invalid_argument("eval_fraction must lie in [0, 1)");
  Index prev = -1;
  for (const LrScheduleEntry& entry : lr_schedule) {
    if (entry.epoch <= prev)
      throw std::invalid_argument("lr_schedule epochs must be strictly increasing");
    if (!(entry.factor > 0)) throw std::invalid_argument("lr_schedule factors must be positive");
    prev = entry.epoch;
  }
}

Ensemble init_ensemble(const TrainConfig& cfg, const ModelConfig& model, Rng& rng) {
  const TauInit tau_init = cfg.mode == TrainMode::Vanilla ? TauInit::UniformGrid : cfg.tau_init;
  const Scalar entry_std = cfg.theta_init_scale / std::sqrt(static_cast<Scalar>(model.d2));

  // Draw all thetas first, then the taus, so the stream layout does not
  // depend on tau_init.
  Ensemble e;
  e.particles.resize(static_cast<std::size_t>(cfg.n_particles));
  for (Index i = 0; i < cfg.n_particles; ++i) {
    Particle& p = e.particles[static_cast<std::size_t>(i)];
    p.theta = Matrix(model.d2, model.d2);
    rng.fill_normal(p.theta, entry_std);
    p.id = i;
  }
  const std::vector<Scalar> taus = tau_init == TauInit::UniformGrid
                                       ? uniform_grid_taus(cfg.n_particles)
                                       : draw_uniform_taus(cfg.n_particles, rng);
  for (Index i = 0; i < cfg.n_particles; ++i)
    e.particles[static_cast<std::size_t>(i)].tau = taus[static_cast<std::size_t>(i)];
  e.sorted = true;
  return clamp_to_q_r(e, cfg.clamp_r);
}

TrainState init_train_state(const TrainConfig& cfg, const ModelConfig& model) {
  Rng rng(cfg.seed);
  TrainState state;
  state.ensemble = init_ensemble(cfg, model, rng);
  state.theta_velocity.assign(static_cast<std::size_t>(cfg.n_particles),
                              Matrix::Zero(model.d2, model.d2));
  state.tau_velocity.assign(static_cast<std::size_t>(cfg.n_particles), 0.0);
  return state;
}

namespace {

void sort_state(TrainState& state) {
  const std::vector<Index> perm = sort_permutation(state.ensemble);
  Ensemble sorted;
  sorted.particles.reserve(state.ensemble.particles.size());
  std::vector<Matrix> tv;
  std::vector<Scalar> sv;
  tv.reserve(perm.size());
  sv.reserve(perm.size());
  for (Index i : perm) {
    sorted.particles.push_back(std::move(state.ensemble.particles[static_cast<std::size_t>(i)]));
    tv.push_back(std::move(state.theta_velocity[static_cast<std::size_t>(i)]));
    sv.push_back(state.tau_velocity[static_cast<std::size_t>(i)]);
  }
  sorted.sorted = true;
  state.ensemble = std::move(sorted);
  state.theta_velocity = std::move(tv);
  state.tau_velocity = std::move(sv);
}

Scalar effective_lr(const TrainConfig& cfg, Index epoch) {
  Scalar lr = cfg.lr;
  for (const LrScheduleEntry& entry : cfg.lr_schedule)
    if (epoch >= entry.epoch) lr *= entry.factor;
  return lr;
}

}  // namespace

void train_step(TrainState& state, const Batch& batch, const ModelConfig& model,
                const TrainConfig& cfg, std::optional<Scalar> lr_override) {
  if (batch.empty()) throw std::invalid_argument("train_step requires a nonempty batch");
  const Scalar lr = lr_override.value_or(cfg.lr);

  sort_state(state);
  const GradientRecord grad = gradients(state.ensemble, batch, model);

  const Index n = state.ensemble.size();
  for (Index i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    Particle& p = state.ensemble.particles[si];

    Matrix g = grad.dtheta[si] + cfg.weight_decay * p.theta;
    state.theta_velocity[si] = cfg.momentum * state.theta_velocity[si] + g;
    p.theta -= lr * state.theta_velocity[si];

    if (cfg.mode == TrainMode::MeanField) {
      state.tau_velocity[si] = cfg.momentum * state.tau_velocity[si] + grad.dtau[si];
      p.tau -= lr * cfg.tau_lr_scale * state.tau_velocity[si];
    }

    if (!p.theta.allFinite() || !std::isfinite(p.tau))
      throw std::runtime_error("non-finite update at step " + std::to_string(state.step));
  }
  state.ensemble.sorted = false;  // tau updates may have reordered particles
  state.ensemble = clamp_to_q_r(state.ensemble, cfg.clamp_r);
  ++state.step;
}

void split_dataset(const Dataset& data, Scalar eval_fraction, Batch& train_out,
                   Batch& eval_out) {
  const std::size_t n = data.samples.size();
  const std::size_t n_eval = static_cast<std::size_t>(std::floor(eval_fraction * n));
  train_out.assign(data.samples.begin(), data.samples.end() - n_eval);
  eval_out.assign(data.samples.end() - n_eval, data.samples.end());
}

TrainState train(const Dataset& data, const ModelConfig& model, const TrainConfig& cfg,
                 const MetricsCallback& on_epoch, std::optional<TrainState> start) {
  cfg.validate();
  model.validate();
  if (data.samples.empty()) throw std::invalid_argument("train requires a nonempty dataset");

  Batch train_set, eval_set;
  split_dataset(data, cfg.eval_fraction, train_set, eval_set);
  if (train_set.empty()) throw std::invalid_argument("train split is empty");

  TrainState state = start ? std::move(*start) : init_train_state(cfg, model);
  const auto t0 = std::chrono::steady_clock::now();

  while (state.epoch < cfg.epochs) {
    const Scalar lr = effective_lr(cfg, state.epoch);

    // Per-epoch shuffle from a stream derived from (seed, epoch): resumed
    // runs replay the identical order.
    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(state.epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

    const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t pos = 0; pos < order.size(); pos += bs) {
      Batch batch;
      batch.reserve(std::min(bs, order.size() - pos));
      for (std::size_t k = pos; k < std::min(pos + bs, order.size()); ++k)
        batch.push_back(train_set[order[k]]);
      train_step(state, batch, model, cfg, lr);
    }
    ++state.epoch;

    MetricsRecord rec;
    rec.step = state.step;
    rec.epoch = state.epoch;
    rec.train_loss = loss(state.ensemble, train_set, model);
    rec.eval_loss = eval_set.empty() ? rec.train_loss : loss(state.ensemble, eval_set, model);
    rec.wallclock_s =
        std::chrono::duration<Scalar>(std::chrono::steady_clock::now() - t0).count();
    state.history.push_back(rec);
    if (on_epoch) on_epoch(rec, state);
  }
  return state;
}

}  // namespace meanfield
