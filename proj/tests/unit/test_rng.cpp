#include "meanfield/rng.hpp"

#include <doctest.h>

using namespace meanfield;

TEST_CASE("identical seed gives identical stream") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}

TEST_CASE("uniform01 stays in [0, 1)") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments are roughly standard") {
  Rng rng(17);
  const int n = 20000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.05);
  CHECK(std::abs(sumsq / n - 1.0) < 0.05);
}

TEST_CASE("state round trip resumes the stream") {
  Rng rng(99);
  for (int i = 0; i < 7; ++i) rng.normal();
  const std::string state = rng.state_string();
  std::vector<double> expect;
  for (int i = 0; i < 20; ++i) expect.push_back(rng.normal());

  Rng other(1);
  other.set_state(state);
  for (int i = 0; i < 20; ++i) CHECK(other.normal() == expect[static_cast<std::size_t>(i)]);
}

TEST_CASE("derive mixes seed and stream") {
  CHECK(Rng::derive(1, 0) != Rng::derive(1, 1));
  CHECK(Rng::derive(1, 0) != Rng::derive(2, 0));
  CHECK(Rng::derive(1, 5) == Rng::derive(1, 5));
}
