#include "velo/evaluation.hpp"

#include <cmath>
#include <stdexcept>

#include "velo/geometry.hpp"

namespace velo {

double range_mse(std::span<const std::array<double, 2>> predictions,
                 std::span<const std::array<double, 2>> ground_truths) {
  if (predictions.empty()) {
    throw std::invalid_argument("range_mse: empty range");
  }
  if (predictions.size() != ground_truths.size()) {
    throw std::invalid_argument("range_mse: unpaired lists");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double dx = predictions[i][0] - ground_truths[i][0];
    const double dy = predictions[i][1] - ground_truths[i][1];
    acc += dx * dx + dy * dy;
  }
  return acc / double(predictions.size());
}

double challenge_score(double e_near, double e_medium, double e_far) {
  if (!(std::isfinite(e_near) && std::isfinite(e_medium) &&
        std::isfinite(e_far)) ||
      e_near < 0.0 || e_medium < 0.0 || e_far < 0.0) {
    throw std::invalid_argument(
        "challenge_score: range errors must be finite and non-negative");
  }
  return (e_near + e_medium + e_far) / 3.0;
}

EvaluationReport evaluate_dataset(std::span<const EvalSample> samples) {
  std::vector<std::array<double, 2>> pred[3], truth[3];
  double pooled = 0.0;
  for (const EvalSample& s : samples) {
    const std::size_t c =
        std::size_t(classify_range_by_distance(s.true_distance));
    pred[c].push_back(s.predicted_velocity);
    truth[c].push_back(s.true_velocity);
    const double dx = s.predicted_velocity[0] - s.true_velocity[0];
    const double dy = s.predicted_velocity[1] - s.true_velocity[1];
    pooled += dx * dx + dy * dy;
  }

  EvaluationReport r;
  r.n_near = pred[0].size();
  r.n_medium = pred[1].size();
  r.n_far = pred[2].size();
  if (!pred[0].empty()) r.e_near = range_mse(pred[0], truth[0]);
  if (!pred[1].empty()) r.e_medium = range_mse(pred[1], truth[1]);
  if (!pred[2].empty()) r.e_far = range_mse(pred[2], truth[2]);
  if (r.e_near && r.e_medium && r.e_far) {
    r.e_v = challenge_score(*r.e_near, *r.e_medium, *r.e_far);
  }
  r.rmse_overall =
      samples.empty() ? 0.0 : std::sqrt(pooled / double(samples.size()));
  return r;
}

}  // namespace velo
