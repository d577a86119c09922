#pragma once

#include "meanfield/data.hpp"
#include "meanfield/dynamics.hpp"
#include "meanfield/rng.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace meanfield {

/// MeanField trains both theta and tau (the blocks' time stamps move);
/// Vanilla freezes tau on the uniform grid, i.e. a standard fixed-step
/// ResNet with step 1/n.
enum class TrainMode { MeanField, Vanilla };

enum class TauInit { UniformGrid, UniformRandom };

std::string to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& name);
std::string to_string(TauInit t);
TauInit parse_tau_init(const std::string& name);

/// Learning rate is multiplied by `factor` at the start of `epoch`
/// (0-based); multiple entries compound.
struct LrScheduleEntry {
  Index epoch = 0;
  Scalar factor = 1.0;
};

struct TrainConfig {
  Index n_particles = 32;
  Scalar lr = 0.1;
  std::vector<LrScheduleEntry> lr_schedule;
  Scalar momentum = 0.9;
  Scalar weight_decay = 1e-4;  // applied to theta only; tau gets none
  Index epochs = 100;
  Index batch_size = 128;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::MeanField;
  TauInit tau_init = TauInit::UniformRandom;
  Scalar theta_init_scale = 1.0;
  Scalar clamp_r = 10.0;
  Scalar tau_lr_scale = 1.0;     // tau and theta have different natural scales
  Scalar eval_fraction = 0.2;    // tail fraction of the dataset held out

  void validate() const;
};

struct MetricsRecord {
  Index step = 0;
  Index epoch = 0;
  Scalar train_loss = 0.0;
  Scalar eval_loss = 0.0;
  Scalar wallclock_s = 0.0;
};

struct TrainState {
  Ensemble ensemble;
  std::vector<Matrix> theta_velocity;
  std::vector<Scalar> tau_velocity;
  Index epoch = 0;
  Index step = 0;
  std::vector<MetricsRecord> history;
};

/// theta entries ~ Normal(0, theta_init_scale^2 / d2); tau from the chosen
/// init (Vanilla always uses the uniform grid); the result is clamped to
/// Q_{clamp_r}. Thetas are drawn before taus, both in particle order.
Ensemble init_ensemble(const TrainConfig& cfg, const ModelConfig& model, Rng& rng);

/// Fresh state with zero velocity buffers, seeded from cfg.seed.
TrainState init_train_state(const TrainConfig& cfg, const ModelConfig& model);

/// One Algorithm-1 step: sort by tau (velocities follow their particles),
/// compute gradients, momentum-SGD update (v = mu v + g + wd theta;
/// theta -= lr v; tau likewise without weight decay, scaled by tau_lr_scale),
/// then clamp back into Q_r x [0,1]. Vanilla mode never touches tau.
/// Throws std::runtime_error naming the step if an update goes non-finite.
void train_step(TrainState& state, const Batch& batch, const ModelConfig& model,
                const TrainConfig& cfg, std::optional<Scalar> lr_override = {});

using MetricsCallback = std::function<void(const MetricsRecord&, const TrainState&)>;

/// Runs cfg.epochs epochs of seeded shuffled minibatches (Fisher-Yates with
/// a per-epoch stream derived from cfg.seed, so resumed runs replay the same
/// order). Emits one metrics record per epoch: full train-split and
/// eval-split losses. Single-threaded and bit-deterministic. Pass `start` to
/// resume from a checkpointed state.
TrainState train(const Dataset& data, const ModelConfig& model, const TrainConfig& cfg,
                 const MetricsCallback& on_epoch = {}, std::optional<TrainState> start = {});

/// Deterministic train/eval split: the eval split is the tail
/// floor(eval_fraction * n) samples. Eval may be empty.
void split_dataset(const Dataset& data, Scalar eval_fraction, Batch& train_out,
                   Batch& eval_out);

}  // namespace meanfield
