#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mud/constellation.hpp"
#include "mud/model.hpp"
#include "mud/probability.hpp"
#include "mud/rng.hpp"

namespace mudtest {

inline mud::Rng make_rng(std::uint64_t lane) { return mud::Rng(2024, 0, mud::StreamPurpose::Test, lane); }

/// Random column-stochastic priors, bounded away from zero.
inline mud::ProbabilityMatrix random_priors(Eigen::Index q, Eigen::Index k, mud::Rng& rng) {
  Eigen::MatrixXd w(q, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < q; ++i) w(i, j) = 0.05 + rng.uniform();
  return mud::ProbabilityMatrix::from_weights(std::move(w), 0.0);
}

/// Uniformly random symbol vector over the constellation.
inline Eigen::VectorXcd random_symbols(Eigen::Index k, const mud::Constellation& c, mud::Rng& rng,
                                       std::vector<std::uint8_t>* indices = nullptr) {
  Eigen::VectorXcd d(k);
  if (indices) indices->resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto q = rng.below(c.size());
    d(j) = c[q];
    if (indices) (*indices)[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(q);
  }
  return d;
}

/// Sylvester-Hadamard columns scaled to unit norm; n must be a power of two.
inline mud::SpreadingMatrix hadamard(Eigen::Index n) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Ones(1, 1);
  while (h.rows() < n) {
    const Eigen::Index m = h.rows();
    Eigen::MatrixXd next(2 * m, 2 * m);
    next << h, h, h, -h;
    h = next;
  }
  return mud::SpreadingMatrix(h / std::sqrt(static_cast<double>(n)));
}

/// Symbol vector for sequence index `index` (base Q, user 0 most significant).
inline Eigen::VectorXcd sequence_symbols(std::uint64_t index, Eigen::Index k, const mud::Constellation& c,
                                         std::vector<std::uint8_t>& seq) {
  seq.assign(static_cast<std::size_t>(k), 0);
  Eigen::VectorXcd d(k);
  for (Eigen::Index j = k; j-- > 0;) {
    seq[static_cast<std::size_t>(j)] = static_cast<std::uint8_t>(index % c.size());
    index /= c.size();
    d(j) = c[seq[static_cast<std::size_t>(j)]];
  }
  return d;
}

/// ||r - S d||^2 - N0 log p(d): the direct metric the tree weights must reproduce up to a constant.
inline double direct_metric(const mud::Observation& r, const mud::SpreadingMatrix& s, const Eigen::VectorXcd& d,
                            const std::vector<std::uint8_t>& seq, const mud::ProbabilityMatrix& priors, double n0) {
  double log_prior = 0.0;
  for (std::size_t k = 0; k < seq.size(); ++k) log_prior += std::log(priors(seq[k], static_cast<Eigen::Index>(k)));
  return (r - s.chips() * d).squaredNorm() - n0 * log_prior;
}

}  // namespace mudtest
