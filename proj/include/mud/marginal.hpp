#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mud/error.hpp"
#include "mud/probability.hpp"
#include "mud/search.hpp"

namespace mud {

/// Per-user symbol posteriors from a detector list.
///
/// Each entry contributes exp(-(w - w_min) / N0) to the cells of its symbols;
/// shifting by the smallest weight is the log-sum-exp normalization, so the
/// largest term is exactly 1. Cells no entry touches end up at the floor.
inline ProbabilityMatrix list_to_posteriors(const DetectorList& list, Eigen::Index alphabet, double n0,
                                            double floor = kDefaultFloor) {
  require(list.size() >= 1, ErrorCode::InvalidParameter, "detector list is empty");
  require(n0 > 0.0, ErrorCode::InvalidParameter, "N0 must be positive");
  const double w_min = *std::min_element(list.weights.begin(), list.weights.end());
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(alphabet, list.users);
  for (std::size_t i = 0; i < list.size(); ++i) {
    const double term = std::exp(-(list.weights[i] - w_min) / n0);
    const auto seq = list.sequence(i);
    for (Eigen::Index k = 0; k < list.users; ++k) {
      require(seq[static_cast<std::size_t>(k)] < alphabet, ErrorCode::InvalidParameter, "symbol index out of range");
      mass(seq[static_cast<std::size_t>(k)], k) += term;
    }
  }
  return ProbabilityMatrix::from_weights(std::move(mass), floor);
}

/// Entrywise posterior / prior, floored and renormalized per column.
inline ProbabilityMatrix extrinsic_from_posterior(const ProbabilityMatrix& posterior, const ProbabilityMatrix& prior,
                                                  double floor = kDefaultFloor) {
  require(posterior.alphabet() == prior.alphabet() && posterior.users() == prior.users(),
          ErrorCode::DimensionMismatch, "posterior and prior shapes differ");
  require((prior.values().array() > 0.0).all(), ErrorCode::InvalidParameter, "prior has zero entries");
  return ProbabilityMatrix::from_weights(posterior.values().cwiseQuotient(prior.values()), floor);
}

}  // namespace mud
