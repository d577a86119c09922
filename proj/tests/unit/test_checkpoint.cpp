#include "meanfield/checkpoint.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace meanfield;

namespace {

RunConfig quick_config() {
  RunConfig cfg = parse_run_config(R"({
    "model": {"d1": 3, "d2": 3},
    "train": {"n_particles": 4, "epochs": 6, "batch_size": 4, "seed": 9,
              "lr": 0.05, "eval_fraction": 0.25},
    "data": {"n_samples": 16, "teacher_n": 3}
  })");
  return cfg;
}

void check_states_equal(const TrainState& a, const TrainState& b) {
  REQUIRE(a.ensemble.particles.size() == b.ensemble.particles.size());
  for (std::size_t i = 0; i < a.ensemble.particles.size(); ++i) {
    CHECK(a.ensemble.particles[i].id == b.ensemble.particles[i].id);
    CHECK(a.ensemble.particles[i].tau == b.ensemble.particles[i].tau);
    CHECK(a.ensemble.particles[i].theta == b.ensemble.particles[i].theta);
    CHECK(a.theta_velocity[i] == b.theta_velocity[i]);
    CHECK(a.tau_velocity[i] == b.tau_velocity[i]);
  }
  CHECK(a.epoch == b.epoch);
  CHECK(a.step == b.step);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].eval_loss == b.history[i].eval_loss);
  }
}

}  // namespace

TEST_CASE("checkpoint save/load round trip is bit exact") {
  const RunConfig cfg = quick_config();
  const ModelConfig model = cfg.model.to_model_config();
  const Dataset data = build_dataset(cfg, model);

  TrainConfig tc = cfg.train;
  tc.epochs = 3;
  const TrainState state = train(data, model, tc);

  const auto path = std::filesystem::temp_directory_path() / "mf_ckpt_roundtrip.json";
  save_checkpoint({Checkpoint{}.version, cfg, state, "note"}, path.string());
  const Checkpoint back = load_checkpoint(path.string());
  check_states_equal(back.state, state);
  CHECK(serialize_run_config(back.config) == serialize_run_config(cfg));
  std::filesystem::remove(path);
}

TEST_CASE("resume reproduces the uninterrupted history bit for bit") {
  const RunConfig cfg = quick_config();
  const ModelConfig model = cfg.model.to_model_config();
  const Dataset data = build_dataset(cfg, model);

  const TrainState full = train(data, model, cfg.train);  // 6 epochs

  TrainConfig head = cfg.train;
  head.epochs = 3;
  const TrainState half = train(data, model, head);

  const auto path = std::filesystem::temp_directory_path() / "mf_ckpt_resume.json";
  save_checkpoint({Checkpoint{}.version, cfg, half, ""}, path.string());
  const Checkpoint loaded = load_checkpoint(path.string());
  const TrainState resumed = train(data, model, cfg.train, {}, loaded.state);

  check_states_equal(resumed, full);
  std::filesystem::remove(path);
}

TEST_CASE("resume compatibility ignores only the epoch budget") {
  RunConfig a = quick_config();
  RunConfig b = quick_config();
  b.train.epochs = 99;
  b.checkpoint_every = 1;
  CHECK(resume_compatible(a, b));
  b.train.lr = 0.5;
  CHECK_FALSE(resume_compatible(a, b));
}

TEST_CASE("corrupt checkpoints are rejected") {
  const auto path = std::filesystem::temp_directory_path() / "mf_ckpt_bad.json";
  {
    std::ofstream f(path);
    f << "{\"version\": \"other\"}";
  }
  CHECK_THROWS_AS(static_cast<void>(load_checkpoint(path.string())), std::invalid_argument);
  CHECK_THROWS_AS(static_cast<void>(load_checkpoint("/nonexistent/ckpt.json")),
                  std::invalid_argument);
  std::filesystem::remove(path);
}
