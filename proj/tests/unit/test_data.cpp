#include "meanfield/data.hpp"

#include "meanfield/linalg.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

using namespace meanfield;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("teacher labels give the teacher zero loss by construction") {
  const ModelConfig model = make_model_config(4, 4, Activation::Tanh);
  TeacherSpec spec;
  spec.n_teacher = 5;
  spec.seed = 3;
  Rng rng(10);
  const Dataset ds = gen_teacher_student(spec, model, 32, rng);
  const Ensemble teacher = make_teacher(spec, model);
  CHECK(loss(teacher, ds.samples, model) == 0.0);

  CHECK(ds.attained_input_radius <= model.input_radius);
  for (const Sample& s : ds.samples) {
    CHECK(s.x.norm() <= model.input_radius);
    CHECK(std::abs(s.y) <= ds.attained_target_bound);
  }
}

TEST_CASE("an empty teacher labels with the bare feature map") {
  const ModelConfig model = make_model_config(3, 3, Activation::ReLU);
  TeacherSpec spec;
  spec.n_teacher = 0;
  Rng rng(4);
  const Dataset ds = gen_teacher_student(spec, model, 8, rng);
  for (const Sample& s : ds.samples) CHECK(s.y == model.w1.dot(matvec(model.w2, s.x)));
}

TEST_CASE("generation is deterministic in the seed") {
  const ModelConfig model = make_model_config(3, 3, Activation::Tanh);
  TeacherSpec spec;
  Rng ra(77), rb(77);
  const Dataset a = gen_teacher_student(spec, model, 16, ra);
  const Dataset b = gen_teacher_student(spec, model, 16, rb);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].x == b.samples[i].x);
    CHECK(a.samples[i].y == b.samples[i].y);
  }
}

TEST_CASE("noise perturbs only the labels") {
  const ModelConfig model = make_model_config(2, 2, Activation::Tanh);
  TeacherSpec clean, noisy;
  noisy.noise = 0.1;
  Rng ra(5), rb(5);
  const Dataset a = gen_teacher_student(clean, model, 8, ra);
  const Dataset b = gen_teacher_student(noisy, model, 8, rb);
  CHECK(a.samples[0].x == b.samples[0].x);
  CHECK(a.samples[0].y != b.samples[0].y);
}

TEST_CASE("csv round trip is bit exact over 1000 rows") {
  const ModelConfig model = make_model_config(5, 4, Activation::Tanh);
  TeacherSpec spec;
  spec.n_teacher = 6;
  Rng rng(21);
  const Dataset ds = gen_teacher_student(spec, model, 1000, rng);
  const auto path = temp_file("mf_roundtrip.csv");
  save_csv(ds, path.string());
  const Dataset back = load_csv(path.string(), model.d1);
  REQUIRE(back.samples.size() == ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(back.samples[i].x == ds.samples[i].x);
    CHECK(back.samples[i].y == ds.samples[i].y);
  }
  CHECK(back.attained_input_radius == ds.attained_input_radius);
  CHECK(back.attained_target_bound == ds.attained_target_bound);
  std::filesystem::remove(path);
}

TEST_CASE("csv parsing errors carry line numbers") {
  const auto path = temp_file("mf_bad.csv");

  {
    std::ofstream f(path);
    f << "1.0,2.0,3.0\n";
  }
  const Dataset one = load_csv(path.string(), 2);
  REQUIRE(one.samples.size() == 1);
  CHECK(one.samples[0].x[0] == 1.0);
  CHECK(one.samples[0].x[1] == 2.0);
  CHECK(one.samples[0].y == 3.0);

  {
    std::ofstream f(path);
    f << "# header\n1.0,2.0,3.0\n0.5,NaN,1.0\n";
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(load_csv(path.string(), 2)),
                       "csv line 3: non-finite value 'NaN'", std::invalid_argument);

  {
    std::ofstream f(path);
    f << "1.0,2.0\n";
  }
  CHECK_THROWS_AS(static_cast<void>(load_csv(path.string(), 2)), std::invalid_argument);

  {
    std::ofstream f(path);
    f << "1.0,abc,3.0\n";
  }
  CHECK_THROWS_AS(static_cast<void>(load_csv(path.string(), 2)), std::invalid_argument);

  {
    std::ofstream f(path);
    f << "# only a header\n";
  }
  CHECK_THROWS_AS(static_cast<void>(load_csv(path.string(), 2)), std::invalid_argument);
  std::filesystem::remove(path);
}
