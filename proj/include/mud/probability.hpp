#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mud/error.hpp"

namespace mud {

/// Default lower bound applied to every probability exchanged in the loop.
inline constexpr double kDefaultFloor = 1e-7;

/// log(sum(exp(values))) without overflow; -inf for an empty or all -inf input.
inline double log_sum_exp(std::span<const double> values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

/// Normalizes `column` to a distribution whose entries are all >= floor.
///
/// Entries below the floor are raised to it and the remaining mass is rescaled
/// among the others, repeating until stable. When no entry is below the floor
/// this is plain normalization. An all-zero column becomes uniform.
inline void normalize_with_floor(std::span<double> column, double floor) {
  const auto n = static_cast<double>(column.size());
  require(floor >= 0.0 && floor * n <= 1.0, ErrorCode::InvalidParameter, "floor too large for alphabet");
  double total = 0.0;
  for (double v : column) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    std::fill(column.begin(), column.end(), 1.0 / n);
    return;
  }
  for (double& v : column) v /= total;
  if (floor == 0.0) return;

  std::vector<bool> pinned(column.size(), false);
  for (;;) {
    double free_mass = 0.0;
    std::size_t pinned_count = 0;
    bool changed = false;
    for (std::size_t i = 0; i < column.size(); ++i) {
      if (!pinned[i] && column[i] < floor) {
        pinned[i] = true;
        changed = true;
      }
      if (pinned[i]) {
        ++pinned_count;
      } else {
        free_mass += column[i];
      }
    }
    if (!changed) return;
    const double target = 1.0 - floor * static_cast<double>(pinned_count);
    for (std::size_t i = 0; i < column.size(); ++i) {
      if (pinned[i]) {
        column[i] = floor;
      } else if (free_mass > 0.0) {
        column[i] *= target / free_mass;
      }
    }
  }
}

/// Q x K column-stochastic matrix: column k is the pmf of user k's symbol.
class ProbabilityMatrix {
 public:
  ProbabilityMatrix() = default;

  static ProbabilityMatrix uniform(Eigen::Index q, Eigen::Index k) {
    require(q >= 1 && k >= 1, ErrorCode::InvalidParameter, "empty probability matrix");
    ProbabilityMatrix m;
    m.probs_ = Eigen::MatrixXd::Constant(q, k, 1.0 / static_cast<double>(q));
    return m;
  }

  /// Normalizes each column of `weights` (nonnegative, unnormalized) with the floor.
  static ProbabilityMatrix from_weights(Eigen::MatrixXd weights, double floor) {
    require(weights.size() > 0, ErrorCode::InvalidParameter, "empty probability matrix");
    require((weights.array() >= 0.0).all(), ErrorCode::InvalidParameter, "negative probability weight");
    ProbabilityMatrix m;
    m.probs_ = std::move(weights);
    for (Eigen::Index k = 0; k < m.probs_.cols(); ++k)
      normalize_with_floor(std::span<double>(m.probs_.col(k).data(), static_cast<std::size_t>(m.probs_.rows())),
                           floor);
    return m;
  }

  [[nodiscard]] Eigen::Index alphabet() const noexcept { return probs_.rows(); }
  [[nodiscard]] Eigen::Index users() const noexcept { return probs_.cols(); }
  [[nodiscard]] double operator()(Eigen::Index q, Eigen::Index k) const { return probs_(q, k); }
  [[nodiscard]] const Eigen::MatrixXd& values() const noexcept { return probs_; }

  [[nodiscard]] bool is_uniform() const {
    return (probs_.array() == 1.0 / static_cast<double>(probs_.rows())).all();
  }

 private:
  Eigen::MatrixXd probs_;
};

}  // namespace mud
