#pragma once

// Brute-force references. Nothing here touches the Gram transform or the
// trellis; both results come straight from enumerating the joint distribution.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mud/constellation.hpp"
#include "mud/error.hpp"
#include "mud/fec.hpp"
#include "mud/model.hpp"
#include "mud/probability.hpp"

namespace mud {

struct OracleCap {
  std::uint64_t max_enumeration = std::uint64_t{1} << 20;
};

/// Exact symbol APPs: p(d | r) proportional to exp(-||r - S d||^2 / N0) p(d),
/// marginalized over all Q^K sequences.
inline ProbabilityMatrix brute_force_symbol_app(const Observation& r, const SpreadingMatrix& s,
                                                const ProbabilityMatrix& priors, const Constellation& c, double n0,
                                                double floor = 0.0, OracleCap cap = {}) {
  const Eigen::Index users = s.users();
  const auto q_count = static_cast<std::uint64_t>(c.size());
  require(r.size() == s.gain(), ErrorCode::DimensionMismatch, "observation length differs from spreading gain");
  require(priors.users() == users && priors.alphabet() == static_cast<Eigen::Index>(q_count),
          ErrorCode::DimensionMismatch, "prior matrix shape differs from Q x K");
  std::uint64_t total = 1;
  for (Eigen::Index k = 0; k < users; ++k) {
    require(total <= cap.max_enumeration / q_count, ErrorCode::CapExceeded, "Q^K exceeds the oracle cap");
    total *= q_count;
  }

  std::vector<double> log_joint(total);
  std::vector<std::uint8_t> seq(static_cast<std::size_t>(users));
  Eigen::VectorXcd d(users);
  for (std::uint64_t index = 0; index < total; ++index) {
    std::uint64_t rest = index;
    double log_prior = 0.0;
    for (Eigen::Index k = users; k-- > 0;) {
      seq[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(rest % q_count);
      rest /= q_count;
      d(k) = c[seq[static_cast<std::size_t>(k)]];
      log_prior += std::log(priors(seq[static_cast<std::size_t>(k)], k));
    }
    log_joint[index] = -(r - s.chips() * d).squaredNorm() / n0 + log_prior;
  }

  const double hi = *std::max_element(log_joint.begin(), log_joint.end());
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(q_count), users);
  for (std::uint64_t index = 0; index < total; ++index) {
    const double p = std::exp(log_joint[index] - hi);
    std::uint64_t rest = index;
    for (Eigen::Index k = users; k-- > 0;) {
      mass(static_cast<Eigen::Index>(rest % q_count), k) += p;
      rest /= q_count;
    }
  }
  return ProbabilityMatrix::from_weights(std::move(mass), floor);
}

/// Exact info-bit marginals by enumerating all 2^I information sequences
/// through the encoder (which starts in state zero).
inline BitProbabilities brute_force_map(const BitProbabilities& coded_priors, const ConvCode& code,
                                        Termination term = Termination::Unterminated, double floor = 0.0,
                                        OracleCap cap = {}) {
  const auto n = static_cast<std::size_t>(code.outputs());
  require(coded_priors.size() % n == 0, ErrorCode::LengthMismatch, "coded length is not a multiple of the rate");
  const std::size_t tail = term == Termination::Terminated ? static_cast<std::size_t>(code.tail_length()) : 0;
  require(coded_priors.size() / n >= tail, ErrorCode::LengthMismatch, "coded stream shorter than the tail");
  const std::size_t info_bits = coded_priors.size() / n - tail;
  require(info_bits < 63 && (std::uint64_t{1} << info_bits) <= cap.max_enumeration, ErrorCode::CapExceeded,
          "2^I exceeds the oracle cap");

  const std::uint64_t total = std::uint64_t{1} << info_bits;
  std::vector<double> log_weight(total);
  Bits info(info_bits);
  for (std::uint64_t index = 0; index < total; ++index) {
    for (std::size_t i = 0; i < info_bits; ++i) info[i] = static_cast<std::uint8_t>((index >> i) & 1u);
    const Bits coded = code.encode(info, term);
    double lw = 0.0;
    for (std::size_t i = 0; i < coded.size(); ++i) lw += std::log(coded_priors[i][coded[i]]);
    log_weight[index] = lw;
  }
  const double hi = *std::max_element(log_weight.begin(), log_weight.end());
  std::vector<BitPmf> marg(info_bits, BitPmf{0.0, 0.0});
  for (std::uint64_t index = 0; index < total; ++index) {
    const double p = std::exp(log_weight[index] - hi);
    for (std::size_t i = 0; i < info_bits; ++i) marg[i][(index >> i) & 1u] += p;
  }
  for (auto& pmf : marg) normalize_with_floor(pmf, floor);
  return marg;
}

}  // namespace mud
