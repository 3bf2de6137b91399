#pragma once

// Virtual full-rank system for overloaded channels.
//
// ||S d||^2 = d* G d with G = S^T S singular whenever K > L. Replacing the
// diagonal of G by a constant rho large enough to make the result positive
// definite, and carrying the removed energy separately in u = diag(G) - rho,
// gives
//
//   d* G d = d* G~ d + sum_k u_k |d_k|^2,   G~ = T^T T,  T lower triangular,
//
// so the likelihood splits into K additive terms where term k depends only on
// d_1..d_k. The tree search in search.hpp runs on that decomposition.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mud/constellation.hpp"
#include "mud/error.hpp"
#include "mud/model.hpp"

namespace mud {

/// Default slack added above the strict lower bound on rho.
inline constexpr double kDefaultRhoMargin = 1.0;

/// Largest -Re{a* b} / |a|^2 over ordered pairs of constellation points.
inline double worst_pair_correlation(const Constellation& c) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& a : c.points()) {
    const double energy = std::norm(a);
    require(energy > 0.0, ErrorCode::DegenerateConstellation, "constellation contains the origin");
    for (const auto& b : c.points()) worst = std::max(worst, -(std::conj(a) * b).real() / energy);
  }
  return worst;
}

/// rho = (K - 1) * worst_pair_correlation + margin, which strictly exceeds the
/// smallest value for which G~ is guaranteed positive definite.
inline double choose_rho(const Constellation& c, Eigen::Index users, double margin = kDefaultRhoMargin) {
  require(users >= 1, ErrorCode::InvalidParameter, "user count must be positive");
  require(margin > 0.0, ErrorCode::InvalidParameter, "rho margin must be positive");
  return static_cast<double>(users - 1) * worst_pair_correlation(c) + margin;
}

/// Lower-triangular T with T^T T = a. The recursion runs from the last index
/// down, so row k of T only involves columns 0..k.
inline Eigen::MatrixXd reverse_cholesky(const Eigen::MatrixXd& a) {
  const Eigen::Index n = a.rows();
  require(a.cols() == n, ErrorCode::DimensionMismatch, "matrix must be square");
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index col = n - 1; col >= 0; --col) {
    double pivot = a(col, col);
    for (Eigen::Index i = col + 1; i < n; ++i) pivot -= t(i, col) * t(i, col);
    if (!(pivot > 0.0))
      throw Error(ErrorCode::FactorizationFailure,
                  "matrix is not positive definite (pivot " + std::to_string(pivot) + " at index " +
                      std::to_string(col) + ")");
    t(col, col) = std::sqrt(pivot);
    for (Eigen::Index b = 0; b < col; ++b) {
      double v = a(col, b);
      for (Eigen::Index i = col + 1; i < n; ++i) v -= t(i, col) * t(i, b);
      t(col, b) = v / t(col, col);
    }
  }
  return t;
}

class GramTransform {
 public:
  GramTransform(const SpreadingMatrix& s, double rho) : rho_(rho) {
    require(rho > 0.0, ErrorCode::InvalidParameter, "rho must be positive");
    gram_ = s.chips().transpose() * s.chips();
    g_tilde_ = gram_;
    g_tilde_.diagonal().setConstant(rho);
    factor_ = reverse_cholesky(g_tilde_);
    u_ = gram_.diagonal().array() - rho;
  }

  [[nodiscard]] Eigen::Index users() const noexcept { return gram_.rows(); }
  [[nodiscard]] double rho() const noexcept { return rho_; }
  [[nodiscard]] const Eigen::MatrixXd& gram() const noexcept { return gram_; }
  [[nodiscard]] const Eigen::MatrixXd& g_tilde() const noexcept { return g_tilde_; }
  /// Lower-triangular factor T with T^T T = G~.
  [[nodiscard]] const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  /// Per-user energy correction diag(G) - rho.
  [[nodiscard]] const Eigen::VectorXd& u() const noexcept { return u_; }

 private:
  double rho_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd g_tilde_;
  Eigen::MatrixXd factor_;
  Eigen::VectorXd u_;
};

inline GramTransform build_transform(const SpreadingMatrix& s, double rho) { return GramTransform(s, rho); }

/// y = -2 r* S, so that ||r - S d||^2 = ||r||^2 + Re{y d} + ||S d||^2.
struct MatchedFilterStats {
  Eigen::VectorXcd y;
};

inline MatchedFilterStats matched_filter(const Observation& r, const SpreadingMatrix& s) {
  require(r.size() == s.gain(), ErrorCode::DimensionMismatch, "observation length differs from spreading gain");
  return {-2.0 * (s.chips().transpose() * r.conjugate())};
}

}  // namespace mud
