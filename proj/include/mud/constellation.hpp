#pragma once

#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mud/error.hpp"

namespace mud {

using Complex = std::complex<double>;

/// Symbol alphabet with zero mean and average energy `power`.
///
/// Point index q carries the bit label of q written MSB first over
/// bits_per_symbol() bits, so the bit <-> symbol map is implied by the order
/// of the points.
class Constellation {
 public:
  explicit Constellation(std::vector<Complex> points) : points_(std::move(points)) {
    const std::size_t q = points_.size();
    require(q >= 2 && std::has_single_bit(q), ErrorCode::InvalidParameter,
            "constellation size must be a power of two >= 2");
    Complex mean{};
    double energy = 0.0;
    for (const auto& p : points_) {
      mean += p;
      energy += std::norm(p);
    }
    mean /= static_cast<double>(q);
    power_ = energy / static_cast<double>(q);
    require(power_ > 0.0, ErrorCode::DegenerateConstellation, "constellation has zero power");
    require(std::abs(mean) <= 1e-12 * std::max(1.0, std::sqrt(power_)), ErrorCode::InvalidParameter,
            "constellation mean must be zero");
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = i + 1; j < q; ++j)
        require(points_[i] != points_[j], ErrorCode::InvalidParameter, "constellation points must be distinct");
    bits_ = std::countr_zero(q);
    real_ = true;
    for (const auto& p : points_) real_ = real_ && p.imag() == 0.0;
  }

  /// bit 0 -> +sqrt(P), bit 1 -> -sqrt(P)
  static Constellation bpsk(double power = 1.0) {
    require(power > 0.0, ErrorCode::InvalidParameter, "power must be positive");
    const double a = std::sqrt(power);
    return Constellation({{a, 0.0}, {-a, 0.0}});
  }

  static Constellation qpsk(double power = 1.0) {
    require(power > 0.0, ErrorCode::InvalidParameter, "power must be positive");
    const double a = std::sqrt(power / 2.0);
    return Constellation({{a, a}, {a, -a}, {-a, a}, {-a, -a}});
  }

  /// Square 16-QAM, Gray labelled per axis (first two bits in-phase).
  static Constellation qam16(double power = 1.0) {
    require(power > 0.0, ErrorCode::InvalidParameter, "power must be positive");
    constexpr double gray_levels[4] = {-3.0, -1.0, 3.0, 1.0};  // label 00,01,10,11
    const double scale = std::sqrt(power / 10.0);
    std::vector<Complex> pts;
    for (int label = 0; label < 16; ++label)
      pts.emplace_back(scale * gray_levels[label >> 2], scale * gray_levels[label & 3]);
    return Constellation(std::move(pts));
  }

  [[nodiscard]] std::size_t size() const noexcept { return points_.size(); }
  [[nodiscard]] int bits_per_symbol() const noexcept { return bits_; }
  [[nodiscard]] double power() const noexcept { return power_; }
  [[nodiscard]] bool is_real() const noexcept { return real_; }
  [[nodiscard]] const std::vector<Complex>& points() const noexcept { return points_; }
  [[nodiscard]] Complex operator[](std::size_t q) const { return points_[q]; }

  /// Bit b (0 = MSB) of the label of point q.
  [[nodiscard]] int label_bit(std::size_t q, int b) const noexcept {
    return static_cast<int>((q >> (bits_ - 1 - b)) & 1u);
  }

 private:
  std::vector<Complex> points_;
  double power_ = 0.0;
  int bits_ = 0;
  bool real_ = false;
};

}  // namespace mud
