#pragma once

#include "meanfield/dynamics.hpp"
#include "meanfield/rng.hpp"

#include <cstdint>
#include <string>

namespace meanfield {

/// Labeled samples. The recorded bounds are the ones actually attained by
/// the data (max ||x|| and max |y|), so they always hold by construction.
struct Dataset {
  Batch samples;
  Scalar attained_input_radius = 0.0;
  Scalar attained_target_bound = 0.0;
};

/// Parameters of the hidden teacher ensemble that labels a synthetic
/// regression task. A teacher of the same model class guarantees the
/// zero-loss global minimizer exists (noise = 0).
struct TeacherSpec {
  Index n_teacher = 16;
  std::uint64_t seed = 7;
  Scalar scale = 1.0;
  Scalar noise = 0.0;
};

/// The teacher ensemble itself: theta entries ~ Normal(0, scale^2/d2), taus
/// iid Uniform[0,1] sorted, clamped to Q_r. Deterministic in spec.seed.
Ensemble make_teacher(const TeacherSpec& spec, const ModelConfig& cfg);

/// Uniform draw from the ball of the given radius: direction from d normals,
/// radius as radius * U^(1/d). Consumes d normals then one uniform.
Vector sample_in_ball(Index d, Scalar radius, Rng& rng);

/// Draws x uniformly in the ball of radius R1 (direction from a normalized
/// Gaussian, radius R1 * U^(1/d1)), labels y = <w1, X_teacher(x, 1)> plus
/// optional Gaussian noise. Per sample the rng is consumed as: d1 normals,
/// one uniform, then one normal if noise > 0.
Dataset gen_teacher_student(const TeacherSpec& spec, const ModelConfig& cfg, Index n_samples,
                            Rng& rng);

/// CSV rows are x_1,...,x_d1,y. Lines starting with '#' are headers. Values
/// are written with 17 significant digits so a save/load round trip is
/// bit-exact. Malformed or non-finite entries raise std::runtime_error with
/// the offending line number.
Dataset load_csv(const std::string& path, Index d1);
void save_csv(const Dataset& ds, const std::string& path);

}  // namespace meanfield
