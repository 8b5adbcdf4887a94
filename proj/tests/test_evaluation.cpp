#include "velo/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include <doctest.h>

#include "velo/rng.hpp"

using namespace velo;

TEST_CASE("range_mse") {
  using V = std::array<double, 2>;
  const std::vector<V> perfect = {{1, 2}, {3, 4}};
  CHECK(range_mse(perfect, perfect) == doctest::Approx(0.0));

  const std::vector<V> p1 = {{1, 1}};
  const std::vector<V> t1 = {{0, 0}};
  CHECK(range_mse(p1, t1) == doctest::Approx(2.0));

  const std::vector<V> p2 = {{1, 0}, {0, 2}};
  const std::vector<V> t2 = {{0, 0}, {0, 0}};
  CHECK(range_mse(p2, t2) == doctest::Approx(2.5));

  CHECK_THROWS_AS(range_mse({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(range_mse(p2, t1), std::invalid_argument);
}

TEST_CASE("range_mse scales quadratically with the error vectors") {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<std::array<double, 2>> pred(5), truth(5, {0.0, 0.0});
    std::vector<std::array<double, 2>> scaled(5);
    const double k = rng.uniform(0.1, 4.0);
    for (auto i = 0u; i < pred.size(); ++i) {
      pred[i] = {rng.uniform(-3, 3), rng.uniform(-3, 3)};
      scaled[i] = {k * pred[i][0], k * pred[i][1]};
    }
    CHECK(range_mse(scaled, truth) ==
          doctest::Approx(k * k * range_mse(pred, truth)).epsilon(1e-12));
  }
}

TEST_CASE("challenge_score reproduces the published leaderboard arithmetic") {
  CHECK(challenge_score(0.12, 0.54, 3.11) ==
        doctest::Approx(1.2567).epsilon(1e-4));
  CHECK(challenge_score(0.18, 0.66, 3.07) ==
        doctest::Approx(1.3033).epsilon(1e-4));
  CHECK(challenge_score(0, 0, 0) == doctest::Approx(0.0));
  CHECK(std::sqrt(1.25) == doctest::Approx(1.118).epsilon(1e-3));
  CHECK_THROWS_AS(challenge_score(-1, 0, 0), std::invalid_argument);
}

TEST_CASE("challenge_score is symmetric and 1-homogeneous") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const double a = rng.uniform(0, 5), b = rng.uniform(0, 5),
                 c = rng.uniform(0, 5), k = rng.uniform(0, 3);
    const double s = challenge_score(a, b, c);
    CHECK(challenge_score(c, a, b) == doctest::Approx(s).epsilon(1e-13));
    CHECK(challenge_score(b, c, a) == doctest::Approx(s).epsilon(1e-13));
    CHECK(challenge_score(k * a, k * b, k * c) ==
          doctest::Approx(k * s).epsilon(1e-12));
  }
}

namespace {

EvalSample sample_at(double distance, std::array<double, 2> err) {
  EvalSample s;
  s.true_velocity = {1.0, -2.0};
  s.predicted_velocity = {1.0 + err[0], -2.0 + err[1]};
  s.true_distance = distance;
  return s;
}

}  // namespace

TEST_CASE("evaluate_dataset") {
  SUBCASE("perfect predictions give the all-zero report") {
    std::vector<EvalSample> samples = {sample_at(10, {0, 0}),
                                       sample_at(30, {0, 0}),
                                       sample_at(60, {0, 0})};
    const EvaluationReport r = evaluate_dataset(samples);
    CHECK(*r.e_near == doctest::Approx(0.0));
    CHECK(*r.e_medium == doctest::Approx(0.0));
    CHECK(*r.e_far == doctest::Approx(0.0));
    CHECK(*r.e_v == doctest::Approx(0.0));
    CHECK(r.rmse_overall == doctest::Approx(0.0));
  }

  SUBCASE("per-range error injection reproduces the leaderboard row") {
    // one vehicle per range with |err|^2 equal to the published entries
    std::vector<EvalSample> samples = {
        sample_at(10, {std::sqrt(0.12), 0}),
        sample_at(30, {0, std::sqrt(0.54)}),
        sample_at(50, {std::sqrt(3.11), 0}),
    };
    const EvaluationReport r = evaluate_dataset(samples);
    CHECK(*r.e_near == doctest::Approx(0.12).epsilon(1e-12));
    CHECK(*r.e_medium == doctest::Approx(0.54).epsilon(1e-12));
    CHECK(*r.e_far == doctest::Approx(3.11).epsilon(1e-12));
    CHECK(*r.e_v == doctest::Approx(1.2567).epsilon(1e-4));
  }

  SUBCASE("ranges bucket by true distance with the fixed boundaries") {
    std::vector<EvalSample> samples = {
        sample_at(19.99, {1, 0}), sample_at(20.0, {1, 0}),
        sample_at(44.99, {1, 0}), sample_at(45.0, {1, 0})};
    const EvaluationReport r = evaluate_dataset(samples);
    CHECK(r.n_near == 1);
    CHECK(r.n_medium == 2);
    CHECK(r.n_far == 1);
  }

  SUBCASE("an empty range leaves the score undefined, never zero") {
    std::vector<EvalSample> samples = {sample_at(10, {1, 1}),
                                       sample_at(30, {1, 1})};
    const EvaluationReport r = evaluate_dataset(samples);
    CHECK(r.e_near.has_value());
    CHECK(r.e_medium.has_value());
    CHECK_FALSE(r.e_far.has_value());
    CHECK_FALSE(r.e_v.has_value());
  }

  SUBCASE("e_v is the mean of the three ranges") {
    Rng rng(17);
    std::vector<EvalSample> samples;
    for (int i = 0; i < 60; ++i) {
      const double d = rng.uniform(5, 70);
      samples.push_back(
          sample_at(d, {rng.uniform(-2, 2), rng.uniform(-2, 2)}));
    }
    const EvaluationReport r = evaluate_dataset(samples);
    REQUIRE(r.e_v.has_value());
    CHECK(*r.e_v == doctest::Approx((*r.e_near + *r.e_medium + *r.e_far) / 3.0)
                        .epsilon(1e-12));
    // pooled RMSE is computed over per-sample squared norms
    double pooled = 0;
    for (const EvalSample& s : samples) {
      const double dx = s.predicted_velocity[0] - s.true_velocity[0];
      const double dy = s.predicted_velocity[1] - s.true_velocity[1];
      pooled += dx * dx + dy * dy;
    }
    CHECK(r.rmse_overall ==
          doctest::Approx(std::sqrt(pooled / 60.0)).epsilon(1e-12));
  }
}
