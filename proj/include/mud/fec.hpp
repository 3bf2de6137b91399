#pragma once

// Outer code of the iterative receiver: feed-forward convolutional codes,
// per-user interleavers and a soft-in/soft-out log-MAP (BCJR) decoder.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mud/error.hpp"
#include "mud/probability.hpp"
#include "mud/rng.hpp"

namespace mud {

using Bits = std::vector<std::uint8_t>;

/// Binary pmf indexed by bit value: {P(0), P(1)}.
using BitPmf = std::array<double, 2>;
using BitProbabilities = std::vector<BitPmf>;

inline BitProbabilities uniform_bits(std::size_t n) { return BitProbabilities(n, BitPmf{0.5, 0.5}); }

enum class Termination { Unterminated, Terminated };

/// Rate 1/n feed-forward convolutional code.
///
/// Generators are given in octal with the MSB tapping the current input, so
/// 05 = 1 + D^2 and 07 = 1 + D + D^2. Per trellis step the outputs are emitted
/// in generator order.
class ConvCode {
 public:
  explicit ConvCode(std::vector<unsigned> generators, int constraint_length = 0)
      : generators_(std::move(generators)) {
    require(!generators_.empty(), ErrorCode::InvalidParameter, "code needs at least one generator");
    int widest = 0;
    for (unsigned g : generators_) {
      require(g != 0, ErrorCode::InvalidParameter, "generator polynomials must be nonzero");
      widest = std::max(widest, static_cast<int>(std::bit_width(g)));
    }
    constraint_length_ = constraint_length == 0 ? widest : constraint_length;
    require(constraint_length_ >= widest && constraint_length_ <= 16, ErrorCode::InvalidParameter,
            "generator degree must be below the constraint length");
    states_ = 1 << (constraint_length_ - 1);
    next_.resize(static_cast<std::size_t>(states_) * 2);
    out_.resize(static_cast<std::size_t>(states_) * 2);
    for (int s = 0; s < states_; ++s) {
      for (int u = 0; u < 2; ++u) {
        const unsigned reg = (static_cast<unsigned>(u) << (constraint_length_ - 1)) | static_cast<unsigned>(s);
        unsigned word = 0;
        for (std::size_t i = 0; i < generators_.size(); ++i)
          word |= static_cast<unsigned>(std::popcount(reg & generators_[i]) & 1) << i;
        next_[index(s, u)] = static_cast<int>(reg >> 1);
        out_[index(s, u)] = word;
      }
    }
  }

  /// Parses "05,07" style octal lists.
  static ConvCode from_octal(const std::string& text) {
    std::vector<unsigned> gens;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
      require(!item.empty() && item.find_first_not_of("01234567") == std::string::npos, ErrorCode::InvalidParameter,
              "generator '" + item + "' is not octal");
      gens.push_back(static_cast<unsigned>(std::stoul(item, nullptr, 8)));
    }
    return ConvCode(std::move(gens));
  }

  /// The (05,07) 4-state rate-1/2 code.
  static ConvCode benchmark() { return ConvCode({05, 07}); }

  [[nodiscard]] const std::vector<unsigned>& generators() const noexcept { return generators_; }
  [[nodiscard]] int constraint_length() const noexcept { return constraint_length_; }
  [[nodiscard]] int states() const noexcept { return states_; }
  [[nodiscard]] int outputs() const noexcept { return static_cast<int>(generators_.size()); }
  [[nodiscard]] double rate() const noexcept { return 1.0 / static_cast<double>(generators_.size()); }
  [[nodiscard]] int tail_length() const noexcept { return constraint_length_ - 1; }

  [[nodiscard]] int next_state(int state, int input) const { return next_[index(state, input)]; }
  /// Output bit i of the branch (state, input).
  [[nodiscard]] int output_bit(int state, int input, int i) const {
    return static_cast<int>((out_[index(state, input)] >> i) & 1u);
  }

  [[nodiscard]] std::size_t coded_length(std::size_t info_bits, Termination term) const {
    const std::size_t steps = info_bits + (term == Termination::Terminated ? tail_length() : 0);
    return steps * generators_.size();
  }

  [[nodiscard]] Bits encode(const Bits& info, Termination term = Termination::Unterminated) const {
    Bits coded;
    coded.reserve(coded_length(info.size(), term));
    int state = 0;
    auto step = [&](int u) {
      for (int i = 0; i < outputs(); ++i) coded.push_back(static_cast<std::uint8_t>(output_bit(state, u, i)));
      state = next_state(state, u);
    };
    for (auto u : info) {
      require(u <= 1, ErrorCode::InvalidParameter, "info bits must be 0 or 1");
      step(u);
    }
    if (term == Termination::Terminated)
      for (int i = 0; i < tail_length(); ++i) step(0);
    return coded;
  }

 private:
  [[nodiscard]] std::size_t index(int s, int u) const { return static_cast<std::size_t>(s) * 2 + u; }

  std::vector<unsigned> generators_;
  int constraint_length_ = 0;
  int states_ = 0;
  std::vector<int> next_;
  std::vector<unsigned> out_;
};

/// Permutation applied as out[j] = in[perm[j]] in the forward direction.
class Interleaver {
 public:
  explicit Interleaver(std::vector<std::size_t> perm) : forward_(std::move(perm)), inverse_(forward_.size()) {
    std::vector<bool> seen(forward_.size(), false);
    for (std::size_t j = 0; j < forward_.size(); ++j) {
      const std::size_t i = forward_[j];
      require(i < forward_.size() && !seen[i], ErrorCode::InvalidParameter, "interleaver is not a permutation");
      seen[i] = true;
      inverse_[i] = j;
    }
  }

  static Interleaver identity(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    return Interleaver(std::move(p));
  }

  static Interleaver random(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    rng.shuffle(std::span<std::size_t>(p));
    return Interleaver(std::move(p));
  }

  [[nodiscard]] std::size_t size() const noexcept { return forward_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& forward() const noexcept { return forward_; }
  [[nodiscard]] const std::vector<std::size_t>& inverse() const noexcept { return inverse_; }

 private:
  std::vector<std::size_t> forward_;
  std::vector<std::size_t> inverse_;
};

enum class Direction { Forward, Inverse };

template <typename T>
std::vector<T> permute(const std::vector<T>& stream, const Interleaver& pi, Direction dir) {
  require(stream.size() == pi.size(), ErrorCode::LengthMismatch, "stream and interleaver lengths differ");
  const auto& map = dir == Direction::Forward ? pi.forward() : pi.inverse();
  std::vector<T> out(stream.size());
  for (std::size_t j = 0; j < stream.size(); ++j) out[j] = stream[map[j]];
  return out;
}

/// Per-bit argmax; ties decide 0.
inline Bits hard_decide(const BitProbabilities& probs) {
  Bits out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i][1] > probs[i][0] ? 1 : 0;
  return out;
}

struct BcjrOptions {
  Termination termination = Termination::Unterminated;
  bool max_log = false;
  double floor = kDefaultFloor;
};

struct BcjrOutput {
  BitProbabilities coded_extrinsic;  // same length and order as the coded priors
  BitProbabilities info_posterior;   // information bits only, tail excluded
};

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b, bool max_log) {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return max_log ? a : a + std::log1p(std::exp(b - a));
}

inline BitPmf pmf_from_logs(double l0, double l1, double floor) {
  const double hi = std::max(l0, l1);
  std::array<double, 2> p{std::exp(l0 - hi), std::exp(l1 - hi)};
  normalize_with_floor(p, floor);
  return p;
}

}  // namespace detail

/// Log-MAP forward-backward decoding of one user's code.
///
/// The encoder starts in state zero. Unterminated frames end with a uniform
/// backward metric; terminated frames end in state zero. The coded extrinsic
/// excludes each bit's own prior, the info posterior includes everything.
inline BcjrOutput bcjr_decode(const BitProbabilities& coded_priors, const ConvCode& code,
                              const BcjrOptions& options = {}) {
  using detail::kNegInf;
  const int n = code.outputs();
  const int states = code.states();
  require(coded_priors.size() % static_cast<std::size_t>(n) == 0, ErrorCode::LengthMismatch,
          "coded length is not a multiple of the generator count");
  const std::size_t steps = coded_priors.size() / static_cast<std::size_t>(n);
  const std::size_t tail = options.termination == Termination::Terminated ? code.tail_length() : 0;
  require(steps >= tail, ErrorCode::LengthMismatch, "coded stream shorter than the termination tail");
  const std::size_t info_bits = steps - tail;
  const bool max_log = options.max_log;

  std::vector<std::array<double, 2>> log_prior(coded_priors.size());
  for (std::size_t i = 0; i < coded_priors.size(); ++i)
    log_prior[i] = {std::log(coded_priors[i][0]), std::log(coded_priors[i][1])};

  // gamma excluding coded bit `skip` (skip = -1 keeps all bits)
  auto gamma = [&](std::size_t t, int s, int u, int skip) {
    if (t >= info_bits && u == 1) return kNegInf;
    double g = 0.0;
    for (int i = 0; i < n; ++i)
      if (i != skip) g += log_prior[t * n + i][code.output_bit(s, u, i)];
    return g;
  };

  const auto width = static_cast<std::size_t>(states);
  std::vector<double> alpha((steps + 1) * width, kNegInf);
  std::vector<double> beta((steps + 1) * width, kNegInf);
  alpha[0] = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    double* next = &alpha[(t + 1) * width];
    for (int s = 0; s < states; ++s) {
      const double a = alpha[t * width + s];
      if (a == kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        double& slot = next[code.next_state(s, u)];
        slot = detail::log_add(slot, a + gamma(t, s, u, -1), max_log);
      }
    }
    const double hi = *std::max_element(next, next + width);
    for (std::size_t s = 0; s < width; ++s) next[s] -= hi;
  }

  if (options.termination == Termination::Terminated) {
    beta[steps * width] = 0.0;
  } else {
    std::fill(beta.begin() + static_cast<std::ptrdiff_t>(steps * width), beta.end(), 0.0);
  }
  for (std::size_t t = steps; t-- > 0;) {
    double* cur = &beta[t * width];
    for (int s = 0; s < states; ++s) {
      double acc = kNegInf;
      for (int u = 0; u < 2; ++u) {
        const double b = beta[(t + 1) * width + code.next_state(s, u)];
        if (b == kNegInf) continue;
        acc = detail::log_add(acc, b + gamma(t, s, u, -1), max_log);
      }
      cur[s] = acc;
    }
    const double hi = *std::max_element(cur, cur + width);
    if (hi != kNegInf)
      for (std::size_t s = 0; s < width; ++s) cur[s] -= hi;
  }

  BcjrOutput out;
  out.coded_extrinsic.resize(coded_priors.size());
  out.info_posterior.resize(info_bits);
  for (std::size_t t = 0; t < steps; ++t) {
    std::array<double, 2> info{kNegInf, kNegInf};
    std::vector<std::array<double, 2>> ext(static_cast<std::size_t>(n), {kNegInf, kNegInf});
    for (int s = 0; s < states; ++s) {
      const double a = alpha[t * width + s];
      if (a == kNegInf) continue;
      for (int u = 0; u < 2; ++u) {
        const double b = beta[(t + 1) * width + code.next_state(s, u)];
        if (b == kNegInf) continue;
        info[u] = detail::log_add(info[u], a + gamma(t, s, u, -1) + b, max_log);
        for (int i = 0; i < n; ++i) {
          auto& slot = ext[static_cast<std::size_t>(i)][code.output_bit(s, u, i)];
          slot = detail::log_add(slot, a + gamma(t, s, u, i) + b, max_log);
        }
      }
    }
    if (t < info_bits) out.info_posterior[t] = detail::pmf_from_logs(info[0], info[1], options.floor);
    for (int i = 0; i < n; ++i)
      out.coded_extrinsic[t * n + i] = detail::pmf_from_logs(ext[i][0], ext[i][1], options.floor);
  }
  return out;
}

}  // namespace mud
