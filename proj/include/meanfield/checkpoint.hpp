#pragma once

#include "meanfield/config.hpp"
#include "meanfield/training.hpp"

#include <string>

namespace meanfield {

/// Full training snapshot. Every float is stored as a hex-float string, so a
/// save/load round trip is bit-exact and resumed runs reproduce the
/// uninterrupted loss history exactly (single-threaded).
struct Checkpoint {
  std::string version = "mf-resnet-ckpt-1";
  RunConfig config;
  TrainState state;
  std::string rng_note;  // shuffle streams are derived from (seed, epoch)
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// True when the two configs describe the same run apart from the epoch
/// budget (resuming may extend it) and checkpoint cadence.
bool resume_compatible(const RunConfig& a, const RunConfig& b);

}  // namespace meanfield
