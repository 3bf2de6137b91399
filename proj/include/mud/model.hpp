#pragma once

// Transmit chain and channel: r = S d + z for K synchronous, equal-power users
// spread by random binary sequences of length L.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mud/constellation.hpp"
#include "mud/error.hpp"
#include "mud/fec.hpp"
#include "mud/rng.hpp"

namespace mud {

/// L x K matrix of +-1/sqrt(L) chips; column k is user k's signature.
class SpreadingMatrix {
 public:
  explicit SpreadingMatrix(Eigen::MatrixXd chips) : chips_(std::move(chips)) {
    require(chips_.rows() >= 1 && chips_.cols() >= 1, ErrorCode::InvalidParameter, "empty spreading matrix");
  }

  [[nodiscard]] Eigen::Index gain() const noexcept { return chips_.rows(); }
  [[nodiscard]] Eigen::Index users() const noexcept { return chips_.cols(); }
  [[nodiscard]] const Eigen::MatrixXd& chips() const noexcept { return chips_; }
  [[nodiscard]] auto column(Eigen::Index k) const { return chips_.col(k); }

 private:
  Eigen::MatrixXd chips_;
};

struct NoiseSpec {
  double sigma2;  // per real dimension
  double n0;      // 2 * sigma2

  static NoiseSpec from_sigma2(double sigma2) {
    require(sigma2 > 0.0 && std::isfinite(sigma2), ErrorCode::InvalidParameter, "noise variance must be positive");
    return {sigma2, 2.0 * sigma2};
  }
};

/// Eb/N0 = P / (2 sigma^2 R log2 Q), solved for sigma^2.
inline NoiseSpec ebn0_to_noise(double ebn0_db, double rate, int q, double power) {
  require(std::isfinite(ebn0_db), ErrorCode::InvalidParameter, "Eb/N0 must be finite");
  require(rate > 0.0 && rate <= 1.0, ErrorCode::InvalidParameter, "code rate must lie in (0, 1]");
  require(q >= 2, ErrorCode::InvalidParameter, "alphabet size must be at least 2");
  require(power > 0.0, ErrorCode::InvalidParameter, "symbol power must be positive");
  const double ebn0 = std::pow(10.0, ebn0_db / 10.0);
  return NoiseSpec::from_sigma2(power / (2.0 * ebn0 * rate * std::log2(static_cast<double>(q))));
}

inline SpreadingMatrix draw_spreading(Eigen::Index users, Eigen::Index gain, Rng& rng) {
  require(users >= 1 && gain >= 1, ErrorCode::InvalidParameter, "spreading dimensions must be positive");
  const double chip = 1.0 / std::sqrt(static_cast<double>(gain));
  Eigen::MatrixXd s(gain, users);
  for (Eigen::Index k = 0; k < users; ++k)
    for (Eigen::Index l = 0; l < gain; ++l) s(l, k) = rng.bit() ? -chip : chip;
  return SpreadingMatrix(std::move(s));
}

/// Channel-use-major symbol indices plus the per-user bit streams fed to the mapper.
struct SymbolFrame {
  Eigen::Index users = 0;
  std::size_t uses = 0;
  std::vector<std::uint8_t> indices;  // uses x users, row-major
  std::vector<Bits> mapped_bits;      // per user, after interleaving

  [[nodiscard]] std::uint8_t at(std::size_t use, Eigen::Index k) const {
    return indices[use * static_cast<std::size_t>(users) + static_cast<std::size_t>(k)];
  }

  [[nodiscard]] Eigen::VectorXcd symbol_vector(std::size_t use, const Constellation& c) const {
    Eigen::VectorXcd d(users);
    for (Eigen::Index k = 0; k < users; ++k) d(k) = c[at(use, k)];
    return d;
  }
};

/// Maps log2(Q)-bit segments (MSB first) onto constellation indices.
inline std::vector<std::uint8_t> map_bits(const Bits& bits, const Constellation& c) {
  const auto m = static_cast<std::size_t>(c.bits_per_symbol());
  require(bits.size() % m == 0, ErrorCode::LengthMismatch, "bit count not divisible by bits per symbol");
  std::vector<std::uint8_t> idx(bits.size() / m);
  for (std::size_t n = 0; n < idx.size(); ++n) {
    unsigned q = 0;
    for (std::size_t b = 0; b < m; ++b) q = (q << 1) | bits[n * m + b];
    idx[n] = static_cast<std::uint8_t>(q);
  }
  return idx;
}

inline SymbolFrame encode_and_modulate(const std::vector<Bits>& info_bits, const ConvCode& code,
                                       const std::vector<Interleaver>& interleavers, const Constellation& c,
                                       Termination term = Termination::Unterminated) {
  require(!info_bits.empty(), ErrorCode::InvalidParameter, "no users");
  require(interleavers.size() == info_bits.size(), ErrorCode::LengthMismatch, "one interleaver per user required");
  SymbolFrame frame;
  frame.users = static_cast<Eigen::Index>(info_bits.size());
  std::vector<std::vector<std::uint8_t>> per_user;
  for (std::size_t k = 0; k < info_bits.size(); ++k) {
    Bits coded = code.encode(info_bits[k], term);
    require(interleavers[k].size() == coded.size(), ErrorCode::LengthMismatch,
            "interleaver length differs from coded length");
    Bits mixed = permute(coded, interleavers[k], Direction::Forward);
    per_user.push_back(map_bits(mixed, c));
    require(per_user.back().size() == per_user.front().size(), ErrorCode::LengthMismatch,
            "users have different frame lengths");
    frame.mapped_bits.push_back(std::move(mixed));
  }
  frame.uses = per_user.front().size();
  frame.indices.resize(frame.uses * info_bits.size());
  for (std::size_t n = 0; n < frame.uses; ++n)
    for (std::size_t k = 0; k < info_bits.size(); ++k) frame.indices[n * info_bits.size() + k] = per_user[k][n];
  return frame;
}

using Observation = Eigen::VectorXcd;

/// One channel use: S d plus circular noise of variance sigma2 per real dimension.
inline Observation observe(const SpreadingMatrix& s, const Eigen::VectorXcd& d, const NoiseSpec& noise, Rng& rng) {
  require(d.size() == s.users(), ErrorCode::DimensionMismatch, "symbol vector length differs from user count");
  Observation r = s.chips() * d;
  const double sd = std::sqrt(noise.sigma2);
  for (Eigen::Index l = 0; l < r.size(); ++l) {
    const double re = rng.gaussian();
    const double im = rng.gaussian();
    r(l) += Complex(sd * re, sd * im);
  }
  return r;
}

inline std::vector<Observation> simulate_channel(const SpreadingMatrix& s, const SymbolFrame& frame,
                                                 const Constellation& c, const NoiseSpec& noise, Rng& rng) {
  require(frame.users == s.users(), ErrorCode::DimensionMismatch, "frame user count differs from spreading matrix");
  std::vector<Observation> out;
  out.reserve(frame.uses);
  for (std::size_t n = 0; n < frame.uses; ++n) out.push_back(observe(s, frame.symbol_vector(n, c), noise, rng));
  return out;
}

}  // namespace mud
