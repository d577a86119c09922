#include "meanfield/training.hpp"

#include "meanfield/linalg.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace meanfield;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.n_particles = 4;
  cfg.lr = 0.05;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 7;
  cfg.theta_init_scale = 0.8;
  cfg.clamp_r = 5.0;
  cfg.eval_fraction = 0.25;
  return cfg;
}

Dataset tiny_dataset(const ModelConfig& model, Index n, std::uint64_t seed) {
  TeacherSpec teacher;
  teacher.n_teacher = 3;
  teacher.seed = seed;
  Rng rng(seed + 1);
  return gen_teacher_student(teacher, model, n, rng);
}

}  // namespace

TEST_CASE("init_ensemble tau grids and determinism") {
  const ModelConfig model = make_model_config(2, 2, Activation::ReLU);
  TrainConfig cfg = small_config();
  cfg.tau_init = TauInit::UniformGrid;

  Rng rng(3);
  const Ensemble e = init_ensemble(cfg, model, rng);
  CHECK(e.particles[0].tau == 0.25);
  CHECK(e.particles[1].tau == 0.5);
  CHECK(e.particles[2].tau == 0.75);
  CHECK(e.particles[3].tau == 1.0);

  // theta_init_scale = 0 gives the identity-like map under ReLU.
  cfg.theta_init_scale = 0.0;
  Rng rng2(3);
  const Ensemble zero = init_ensemble(cfg, model, rng2);
  Vector x(2);
  x << 0.3, -0.8;
  const Trajectory traj = forward(zero, x, model);
  CHECK(traj.states.back() == traj.states.front());

  // Same seed, same ensemble, bit for bit.
  cfg.theta_init_scale = 0.8;
  cfg.tau_init = TauInit::UniformRandom;
  Rng ra(11), rb(11);
  const Ensemble a = init_ensemble(cfg, model, ra);
  const Ensemble b = init_ensemble(cfg, model, rb);
  for (std::size_t i = 0; i < a.particles.size(); ++i) {
    CHECK(a.particles[i].theta == b.particles[i].theta);
    CHECK(a.particles[i].tau == b.particles[i].tau);
  }
}

TEST_CASE("vanilla mode is a fixed-step ResNet with step 1/n") {
  const Index n = 8;  // dyadic so the tau differences are exactly 1/n
  const ModelConfig model = make_model_config(3, 3, Activation::Tanh);
  TrainConfig cfg = small_config();
  cfg.n_particles = n;
  cfg.mode = TrainMode::Vanilla;
  Rng rng(5);
  const Ensemble e = init_ensemble(cfg, model, rng);

  Vector x(3);
  x << 0.4, -0.2, 0.9;
  Vector state = matvec(model.w2, x);
  for (Index l = 0; l < n; ++l)
    state += (1.0 / static_cast<double>(n)) *
             apply_block(e.particles[static_cast<std::size_t>(l)].theta, state, model.act);
  CHECK(forward(e, x, model).states.back() == state);
}

TEST_CASE("train_step leaves a perfectly fit model unchanged") {
  const ModelConfig model = make_model_config(2, 2, Activation::Tanh);
  TrainConfig cfg = small_config();
  cfg.momentum = 0.9;
  TrainState state = init_train_state(cfg, model);

  Batch batch;
  Rng rng(13);
  for (int k = 0; k < 4; ++k) {
    Sample s;
    s.x = Vector(2);
    s.x << 0.3 * rng.normal(), 0.3 * rng.normal();
    s.y = model.w1.dot(forward(state.ensemble, s.x, model).states.back());
    batch.push_back(s);
  }
  const Ensemble before = state.ensemble;
  train_step(state, batch, model, cfg);
  CHECK(state.step == 1);
  for (std::size_t i = 0; i < before.particles.size(); ++i) {
    CHECK(state.ensemble.particles[i].theta == before.particles[i].theta);
    CHECK(state.ensemble.particles[i].tau == before.particles[i].tau);
  }
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const ModelConfig model = make_model_config(2, 2, Activation::Tanh);
  TrainConfig cfg = small_config();
  TrainState state = init_train_state(cfg, model);
  const Dataset data = tiny_dataset(model, 6, 17);
  const Ensemble before = state.ensemble;
  train_step(state, data.samples, model, cfg, 0.0);
  for (const Particle& p : state.ensemble.particles) {
    bool found = false;
    for (const Particle& q : before.particles)
      if (q.id == p.id && q.theta == p.theta && q.tau == p.tau) found = true;
    CHECK(found);
  }
}

TEST_CASE("one hand-sized SGD step matches pencil arithmetic") {
  // d1 = d2 = 1, w2 = w1 = [1], ReLU, theta = 0.5, tau = 0.8, x = 1, y = 0:
  //   X1 = 1 + 0.8 * 0.5 = 1.4, p1 = 1.4
  //   dtheta = 0.8 * 1.4 * 1 = 1.12, dtau = 1.4 * 0.5 = 0.7
  // lr = 0.1, weight decay 0.01 on theta only:
  //   theta' = 0.5 - 0.1 * (1.12 + 0.01 * 0.5) = 0.3875
  //   tau'   = 0.8 - 0.1 * 0.7 = 0.73
  const ModelConfig model = make_model_config(1, 1, Activation::ReLU);
  TrainConfig cfg = small_config();
  cfg.n_particles = 1;
  cfg.lr = 0.1;
  cfg.momentum = 0.9;  // first step: velocities start at zero
  cfg.weight_decay = 0.01;

  TrainState state;
  state.ensemble.particles.push_back({Matrix::Constant(1, 1, 0.5), 0.8, 0});
  state.ensemble.sorted = true;
  state.theta_velocity.assign(1, Matrix::Zero(1, 1));
  state.tau_velocity.assign(1, 0.0);

  Vector x(1);
  x << 1.0;
  train_step(state, {{x, 0.0}}, model, cfg);
  CHECK(state.ensemble.particles[0].theta(0, 0) == doctest::Approx(0.3875).epsilon(1e-12));
  CHECK(state.ensemble.particles[0].tau == doctest::Approx(0.73).epsilon(1e-12));
}

TEST_CASE("particle invariants hold after every step") {
  const ModelConfig model = make_model_config(3, 3, Activation::Tanh);
  TrainConfig cfg = small_config();
  cfg.n_particles = 6;
  cfg.lr = 0.5;  // aggressive on purpose
  cfg.clamp_r = 1.5;
  cfg.momentum = 0.9;
  cfg.weight_decay = 1e-4;
  TrainState state = init_train_state(cfg, model);
  const Dataset data = tiny_dataset(model, 10, 23);
  for (int step = 0; step < 25; ++step) {
    train_step(state, data.samples, model, cfg);
    for (const Particle& p : state.ensemble.particles) {
      CHECK(p.tau >= 0.0);
      CHECK(p.tau <= 1.0);
      CHECK(p.theta.norm() <= cfg.clamp_r);
    }
  }
}

TEST_CASE("a sufficiently small full-batch step never increases the loss") {
  const ModelConfig model = make_model_config(3, 3, Activation::Tanh);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig cfg = small_config();
    cfg.n_particles = 5;
    cfg.seed = seed;
    const Dataset data = tiny_dataset(model, 12, seed * 31 + 5);
    const TrainState start = init_train_state(cfg, model);
    const double base = loss(start.ensemble, data.samples, model);

    double lr = 0.1;
    bool descended = false;
    for (int halving = 0; halving <= 10 && !descended; ++halving, lr *= 0.5) {
      TrainState state = start;
      train_step(state, data.samples, model, cfg, lr);
      descended = loss(state.ensemble, data.samples, model) <= base;
    }
    CHECK(descended);
  }
}

TEST_CASE("training history is deterministic and exchangeable over particle order") {
  const ModelConfig model = make_model_config(3, 3, Activation::Tanh);
  TrainConfig cfg = small_config();
  cfg.n_particles = 5;
  cfg.epochs = 4;
  cfg.batch_size = 4;
  const Dataset data = tiny_dataset(model, 12, 37);

  const TrainState run1 = train(data, model, cfg);
  const TrainState run2 = train(data, model, cfg);
  REQUIRE(run1.history.size() == run2.history.size());
  for (std::size_t i = 0; i < run1.history.size(); ++i) {
    CHECK(run1.history[i].train_loss == run2.history[i].train_loss);
    CHECK(run1.history[i].eval_loss == run2.history[i].eval_loss);
  }

  // Permute the particle storage order; sorting restores the architecture.
  TrainState shuffled = init_train_state(cfg, model);
  std::rotate(shuffled.ensemble.particles.begin(), shuffled.ensemble.particles.begin() + 2,
              shuffled.ensemble.particles.end());
  std::rotate(shuffled.theta_velocity.begin(), shuffled.theta_velocity.begin() + 2,
              shuffled.theta_velocity.end());
  std::rotate(shuffled.tau_velocity.begin(), shuffled.tau_velocity.begin() + 2,
              shuffled.tau_velocity.end());
  shuffled.ensemble.sorted = false;
  const TrainState run3 = train(data, model, cfg, {}, std::move(shuffled));
  REQUIRE(run3.history.size() == run1.history.size());
  for (std::size_t i = 0; i < run1.history.size(); ++i)
    CHECK(run3.history[i].train_loss == run1.history[i].train_loss);
}

TEST_CASE("zero epochs returns the initial state with empty metrics") {
  const ModelConfig model = make_model_config(2, 2, Activation::Tanh);
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  const Dataset data = tiny_dataset(model, 6, 41);
  const TrainState state = train(data, model, cfg);
  CHECK(state.history.empty());
  CHECK(state.step == 0);
  Rng rng(cfg.seed);
  const Ensemble expect = init_ensemble(cfg, model, rng);
  for (std::size_t i = 0; i < expect.particles.size(); ++i)
    CHECK(state.ensemble.particles[i].theta == expect.particles[i].theta);
}

TEST_CASE("lr schedule epochs must increase strictly") {
  TrainConfig cfg = small_config();
  cfg.lr_schedule = {{2, 0.1}, {4, 0.5}};
  cfg.validate();
  cfg.lr_schedule = {{4, 0.1}, {2, 0.5}};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
