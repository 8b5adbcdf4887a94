#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace velo {

struct EvaluationReport {
  std::optional<double> e_near;    // m^2/s^2, empty range -> nullopt
  std::optional<double> e_medium;
  std::optional<double> e_far;
  std::optional<double> e_v;       // three-range mean, undefined if any empty
  std::size_t n_near = 0;
  std::size_t n_medium = 0;
  std::size_t n_far = 0;
  double rmse_overall = 0.0;       // sqrt of pooled per-sample squared error
};

// Mean over samples of the squared Euclidean norm of the 2-D velocity error.
double range_mse(std::span<const std::array<double, 2>> predictions,
                 std::span<const std::array<double, 2>> ground_truths);

// (e_near + e_medium + e_far) / 3
double challenge_score(double e_near, double e_medium, double e_far);

struct EvalSample {
  std::string vehicle_id;
  std::array<double, 2> predicted_velocity{};
  std::array<double, 2> true_velocity{};
  double true_distance = 0.0;  // buckets use ground-truth distance
};

EvaluationReport evaluate_dataset(std::span<const EvalSample> samples);

}  // namespace velo
