#pragma once

// Linear inner detectors used as comparison points for the list detector:
// soft parallel interference cancellation and the conditional (per-user)
// LMMSE filter. Both return Gaussian-approximation extrinsics.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mud/constellation.hpp"
#include "mud/error.hpp"
#include "mud/model.hpp"
#include "mud/probability.hpp"

namespace mud {

struct SoftStatistics {
  Eigen::VectorXcd means;
  Eigen::VectorXd variances;
};

inline SoftStatistics soft_statistics(const ProbabilityMatrix& priors, const Constellation& c) {
  require(priors.alphabet() == static_cast<Eigen::Index>(c.size()), ErrorCode::DimensionMismatch,
          "prior alphabet differs from constellation");
  SoftStatistics st{Eigen::VectorXcd::Zero(priors.users()), Eigen::VectorXd::Zero(priors.users())};
  for (Eigen::Index k = 0; k < priors.users(); ++k) {
    Complex m{};
    double e = 0.0;
    for (Eigen::Index q = 0; q < priors.alphabet(); ++q) {
      m += priors(q, k) * c[static_cast<std::size_t>(q)];
      e += priors(q, k) * std::norm(c[static_cast<std::size_t>(q)]);
    }
    st.means(k) = m;
    st.variances(k) = std::max(0.0, e - std::norm(m));
  }
  return st;
}

namespace detail {

/// Column of extrinsic probabilities for z = gain * d + Gaussian residual.
/// Real constellations use a real residual of variance `variance`, complex
/// ones a circular residual of total variance `variance`.
inline void gaussian_column(Eigen::MatrixXd& out, Eigen::Index k, Complex z, double gain, double variance,
                            const Constellation& c) {
  variance = std::max(variance, std::numeric_limits<double>::min());
  const double scale = c.is_real() ? 2.0 * variance : variance;
  std::vector<double> logs(c.size());
  for (std::size_t q = 0; q < c.size(); ++q) {
    const Complex diff = c.is_real() ? Complex(z.real() - gain * c[q].real(), 0.0) : z - gain * c[q];
    logs[q] = -std::norm(diff) / scale;
  }
  const double hi = *std::max_element(logs.begin(), logs.end());
  for (std::size_t q = 0; q < c.size(); ++q) out(static_cast<Eigen::Index>(q), k) = std::exp(logs[q] - hi);
}

/// Residual noise variance seen by a detector: per real dimension for real
/// constellations, total for complex ones.
inline double effective_noise(const NoiseSpec& noise, const Constellation& c) {
  return c.is_real() ? noise.sigma2 : noise.n0;
}

}  // namespace detail

/// Soft PIC: cancel the interferers' soft means, match-filter, and treat the
/// remaining interference plus noise as Gaussian.
inline ProbabilityMatrix soft_pic_detect(const Observation& r, const SpreadingMatrix& s,
                                         const ProbabilityMatrix& priors, const Constellation& c,
                                         const NoiseSpec& noise, double floor = kDefaultFloor) {
  require(r.size() == s.gain() && priors.users() == s.users(), ErrorCode::DimensionMismatch,
          "detector inputs have inconsistent shapes");
  const auto st = soft_statistics(priors, c);
  const Eigen::MatrixXd gram = s.chips().transpose() * s.chips();
  const Eigen::VectorXcd rr = c.is_real() ? Eigen::VectorXcd(r.real().cast<Complex>()) : r;
  const Eigen::VectorXcd residual = rr - s.chips() * st.means;
  const double sigma = detail::effective_noise(noise, c);
  Eigen::MatrixXd out(priors.alphabet(), s.users());
  for (Eigen::Index k = 0; k < s.users(); ++k) {
    const Complex z = s.column(k).cast<Complex>().dot(residual) + gram(k, k) * st.means(k);
    double variance = sigma * gram(k, k);
    for (Eigen::Index j = 0; j < s.users(); ++j)
      if (j != k) variance += gram(k, j) * gram(k, j) * st.variances(j);
    detail::gaussian_column(out, k, z, gram(k, k), variance, c);
  }
  return ProbabilityMatrix::from_weights(std::move(out), floor);
}

/// Conditional LMMSE: for user k, filter w = (S V_k S^T + sigma^2 I)^-1 s_k P
/// where V_k holds the interferers' prior variances and P for user k.
inline ProbabilityMatrix lmmse_detect(const Observation& r, const SpreadingMatrix& s, const ProbabilityMatrix& priors,
                                      const Constellation& c, const NoiseSpec& noise, double floor = kDefaultFloor) {
  require(r.size() == s.gain() && priors.users() == s.users(), ErrorCode::DimensionMismatch,
          "detector inputs have inconsistent shapes");
  const auto st = soft_statistics(priors, c);
  const double power = c.power();
  const Eigen::MatrixXd& chips = s.chips();
  const Eigen::VectorXcd rr = c.is_real() ? Eigen::VectorXcd(r.real().cast<Complex>()) : r;
  const Eigen::VectorXcd residual = rr - chips * st.means;
  const double sigma = detail::effective_noise(noise, c);
  const Eigen::MatrixXd base = chips * st.variances.asDiagonal() * chips.transpose() +
                               sigma * Eigen::MatrixXd::Identity(s.gain(), s.gain());
  Eigen::MatrixXd out(priors.alphabet(), s.users());
  for (Eigen::Index k = 0; k < s.users(); ++k) {
    const Eigen::VectorXd sk = chips.col(k);
    const Eigen::MatrixXd cov = base + (power - st.variances(k)) * sk * sk.transpose();
    const Eigen::VectorXd w = cov.llt().solve(sk) * power;
    const double gain = w.dot(sk);
    const double variance = w.dot(cov * w) - power * gain * gain;
    const Complex z = w.cast<Complex>().dot(residual + sk.cast<Complex>() * st.means(k));
    detail::gaussian_column(out, k, z, gain, variance, c);
  }
  return ProbabilityMatrix::from_weights(std::move(out), floor);
}

}  // namespace mud
