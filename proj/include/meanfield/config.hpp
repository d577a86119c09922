#pragma once

#include "meanfield/data.hpp"
#include "meanfield/diagnostics.hpp"
#include "meanfield/dynamics.hpp"
#include "meanfield/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace meanfield {

/// How the fixed maps of the model are generated. Identity pads ones on the
/// diagonal; Orthonormal draws a seeded Gaussian and orthonormalizes it (all
/// singular values 1 either way).
enum class W2Mode { Identity, Orthonormal };
enum class W1Mode { Average, Basis };

struct ModelSettings {
  Index d1 = 8;
  Index d2 = 8;
  Activation act = Activation::Tanh;
  Scalar r = 10.0;
  Scalar input_radius = 1.0;
  Scalar target_bound = 4.0;
  TailMode tail_mode = TailMode::Drop;
  W2Mode w2_mode = W2Mode::Identity;
  std::uint64_t w2_seed = 1234;
  W1Mode w1_mode = W1Mode::Average;

  ModelConfig to_model_config() const;
};

struct DataSettings {
  Index n_samples = 256;
  std::uint64_t seed = 42;  // x draws (and label noise)
  std::string csv_path;     // when nonempty, load instead of generating
  TeacherSpec teacher;
};

struct DiagSettings {
  std::uint64_t seed = 99;
  Index batch_size = 16;
  Scalar gradcheck_h = 1e-5;
  Scalar gradcheck_tol = 1e-5;
  std::vector<Scalar> stability_scales = {1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<Index> expansion_depths = {8, 16, 32, 64};
  Index expansion_seeds = 10;
  Scalar expansion_theta_scale = 1.0;
  Index descent_candidates = 256;
  Scalar descent_half_width = 0.1;
  Scalar descent_candidate_scale = 1.5;
  Index descent_pretrain_steps = 50;
  std::vector<Scalar> homogeneity_lambdas = {0.5, 1.0, 2.0, 4.0};
  Scalar homogeneity_tol = 1e-9;
};

struct CompareSettings {
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

/// Everything a run needs, in one document. Parsing is strict: unknown keys
/// are rejected with the offending key named, and parse -> serialize ->
/// parse is the identity.
struct RunConfig {
  ModelSettings model;
  TrainConfig train;
  Index checkpoint_every = 50;  // epochs; 0 disables periodic checkpoints
  DataSettings data;
  DiagSettings diag;
  CompareSettings compare;

  void validate() const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

/// Dataset per the config: CSV when data.csv_path is set, otherwise the
/// seeded teacher-student generator.
Dataset build_dataset(const RunConfig& cfg, const ModelConfig& model);

}  // namespace meanfield
