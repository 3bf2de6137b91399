#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "mud/gram.hpp"
#include "mud/marginal.hpp"
#include "mud/oracle.hpp"
#include "mud/search.hpp"

using namespace mud;

namespace {

DetectorList make_list(Eigen::Index users, std::vector<std::vector<std::uint8_t>> seqs, std::vector<double> weights) {
  DetectorList l;
  l.users = users;
  for (const auto& s : seqs) l.symbols.insert(l.symbols.end(), s.begin(), s.end());
  l.weights = std::move(weights);
  return l;
}

void expect_columns_normalized(const ProbabilityMatrix& p) {
  for (Eigen::Index k = 0; k < p.users(); ++k) EXPECT_NEAR(p.values().col(k).sum(), 1.0, 1e-12);
}

}  // namespace

TEST(Floor, NoOpWhenAboveFloor) {
  std::array<double, 3> v{0.2, 0.3, 0.5};
  normalize_with_floor(v, 1e-7);
  EXPECT_DOUBLE_EQ(v[0], 0.2);
  EXPECT_DOUBLE_EQ(v[1], 0.3);
  EXPECT_DOUBLE_EQ(v[2], 0.5);
}

TEST(Floor, RaisesSmallEntries) {
  std::array<double, 4> v{1.0, 0.0, 1e-12, 3.0};
  normalize_with_floor(v, 1e-3);
  EXPECT_DOUBLE_EQ(v[1], 1e-3);
  EXPECT_DOUBLE_EQ(v[2], 1e-3);
  EXPECT_NEAR(v[0] + v[1] + v[2] + v[3], 1.0, 1e-15);
  EXPECT_NEAR(v[3] / v[0], 3.0, 1e-12);
}

TEST(Floor, ZeroColumnBecomesUniform) {
  std::array<double, 2> v{0.0, 0.0};
  normalize_with_floor(v, 1e-7);
  EXPECT_DOUBLE_EQ(v[0], 0.5);
  EXPECT_DOUBLE_EQ(v[1], 0.5);
}

TEST(Floor, TooLargeRejected) {
  std::array<double, 4> v{1, 1, 1, 1};
  EXPECT_THROW(normalize_with_floor(v, 0.3), Error);
}

TEST(ProbabilityMatrixTest, FromWeightsValidates) {
  Eigen::MatrixXd w(2, 1);
  w << -1.0, 2.0;
  EXPECT_THROW(ProbabilityMatrix::from_weights(w, 0.0), Error);
  EXPECT_TRUE(ProbabilityMatrix::uniform(4, 3).is_uniform());
}

TEST(LogSumExp, StableForLargeValues) {
  const std::vector<double> v{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(v), 1000.0 + std::log(2.0), 1e-12);
}

TEST(Posteriors, SingleEntryIsNearCertain) {
  const auto list = make_list(3, {{0, 1, 0}}, {4.2});
  const auto p = list_to_posteriors(list, 2, 1.0);
  expect_columns_normalized(p);
  EXPECT_NEAR(p(0, 0), 1.0 - kDefaultFloor, 1e-15);
  EXPECT_DOUBLE_EQ(p(1, 0), kDefaultFloor);
  EXPECT_DOUBLE_EQ(p(0, 1), kDefaultFloor);
  EXPECT_NEAR(p(1, 1), 1.0 - kDefaultFloor, 1e-15);
}

TEST(Posteriors, SymmetricPair) {
  const auto list = make_list(3, {{0, 1, 1}, {1, 1, 1}}, {-2.0, -2.0});
  const auto p = list_to_posteriors(list, 2, 0.5);
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(1, 0), 0.5);
  EXPECT_NEAR(p(1, 1), 1.0 - kDefaultFloor, 1e-15);
  EXPECT_NEAR(p(1, 2), 1.0 - kDefaultFloor, 1e-15);
}

TEST(Posteriors, ShiftInvariance) {
  auto rng = mudtest::make_rng(41);
  std::vector<std::vector<std::uint8_t>> seqs;
  std::vector<double> w, shifted;
  for (int i = 0; i < 40; ++i) {
    seqs.push_back({static_cast<std::uint8_t>(rng.below(4)), static_cast<std::uint8_t>(rng.below(4))});
    w.push_back(3.0 * rng.uniform());
    shifted.push_back(w.back() + 1234.5);
  }
  const auto a = list_to_posteriors(make_list(2, seqs, w), 4, 0.7);
  const auto b = list_to_posteriors(make_list(2, seqs, shifted), 4, 0.7);
  EXPECT_LT((a.values() - b.values()).cwiseAbs().maxCoeff(), 1e-12);
  expect_columns_normalized(a);
}

TEST(Posteriors, ExhaustiveListIsExact) {
  auto rng = mudtest::make_rng(42);
  const auto c = Constellation::bpsk();
  for (Eigen::Index k : {1, 3, 6, 10}) {
    const auto s = draw_spreading(k, 8, rng);
    const auto noise = ebn0_to_noise(3.0, 0.5, 2, 1.0);
    const auto r = observe(s, mudtest::random_symbols(k, c, rng), noise, rng);
    const auto priors = mudtest::random_priors(2, k, rng);
    const auto t = build_transform(s, choose_rho(c, k));
    const auto list = exhaustive_list(matched_filter(r, s), t, priors, c, noise.n0);
    const auto approx = list_to_posteriors(list, 2, noise.n0, 0.0);
    const auto exact = brute_force_symbol_app(r, s, priors, c, noise.n0);
    EXPECT_LT((approx.values() - exact.values()).cwiseAbs().maxCoeff(), 1e-9) << "K=" << k;
  }
}

TEST(Posteriors, EmptyListRejected) {
  DetectorList empty;
  empty.users = 2;
  EXPECT_THROW(list_to_posteriors(empty, 2, 1.0), Error);
}

TEST(Extrinsic, UniformPriorPassesPosteriorThrough) {
  auto rng = mudtest::make_rng(43);
  const auto post = mudtest::random_priors(4, 5, rng);
  const auto ext = extrinsic_from_posterior(post, ProbabilityMatrix::uniform(4, 5));
  EXPECT_LT((ext.values() - post.values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Extrinsic, PosteriorEqualToPriorIsUninformative) {
  auto rng = mudtest::make_rng(44);
  const auto p = mudtest::random_priors(4, 5, rng);
  EXPECT_LT((extrinsic_from_posterior(p, p).values().array() - 0.25).abs().maxCoeff(), 1e-12);
}

TEST(Extrinsic, CompositionRecoversPosterior) {
  auto rng = mudtest::make_rng(45);
  for (int trial = 0; trial < 100; ++trial) {
    const auto post = mudtest::random_priors(2, 6, rng);
    const auto prior = mudtest::random_priors(2, 6, rng);
    const auto ext = extrinsic_from_posterior(post, prior);
    const auto back = ProbabilityMatrix::from_weights(ext.values().cwiseProduct(prior.values()), 0.0);
    EXPECT_LT((back.values() - post.values()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Extrinsic, ShapeMismatchRejected) {
  EXPECT_THROW(extrinsic_from_posterior(ProbabilityMatrix::uniform(2, 3), ProbabilityMatrix::uniform(2, 4)), Error);
}
