#include <gtest/gtest.h>

#include "common.hpp"
#include "mud/gram.hpp"
#include "mud/marginal.hpp"
#include "mud/search.hpp"

using namespace mud;

// Randomized checks over many spreading draws.

TEST(Property, FactorConsistency) {
  auto rng = mudtest::make_rng(91);
  const auto c = Constellation::bpsk();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = static_cast<Eigen::Index>(2 + rng.below(31));
    const Eigen::Index l = rng.bit() ? 8 : 4;
    const auto t = build_transform(draw_spreading(k, l, rng), choose_rho(c, k));
    ASSERT_LT((t.factor().transpose() * t.factor() - t.g_tilde()).cwiseAbs().maxCoeff(), 1e-9)
        << "K=" << k << " L=" << l;
  }
}

TEST(Property, PositiveDefiniteUpToFourTimesOverload) {
  auto rng = mudtest::make_rng(92);
  for (const auto& c : {Constellation::bpsk(), Constellation::qpsk(), Constellation::qam16()}) {
    for (int trial = 0; trial < 3000; ++trial) {
      const Eigen::Index l = rng.bit() ? 8 : 4;
      const Eigen::Index k = trial % 3 == 0 ? 4 * l : static_cast<Eigen::Index>(1 + rng.below(4 * l));
      ASSERT_NO_THROW(build_transform(draw_spreading(k, l, rng), choose_rho(c, k))) << "K=" << k << " L=" << l;
    }
  }
}

TEST(Property, TriangularCausality) {
  auto rng = mudtest::make_rng(93);
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = static_cast<Eigen::Index>(2 + rng.below(20));
    const auto t = build_transform(draw_spreading(k, 8, rng), choose_rho(Constellation::bpsk(), k));
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = i + 1; j < k; ++j) ASSERT_EQ(t.factor()(i, j), 0.0);
  }
}

TEST(Property, PrefixWeightsDependOnlyOnPrefix) {
  // changing symbols below depth k never changes the weight accumulated up to k
  auto rng = mudtest::make_rng(94);
  const auto c = Constellation::qpsk();
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = draw_spreading(8, 4, rng);
    const auto t = build_transform(s, choose_rho(c, 8));
    Observation r(4);
    for (Eigen::Index i = 0; i < 4; ++i) r(i) = Complex(rng.gaussian(), rng.gaussian());
    const auto stats = matched_filter(r, s);
    const auto priors = mudtest::random_priors(4, 8, rng);
    std::vector<std::uint8_t> a(8), b(8);
    for (auto& v : a) v = static_cast<std::uint8_t>(rng.below(4));
    const std::size_t depth = 1 + rng.below(7);
    b = a;
    for (std::size_t j = depth; j < 8; ++j) b[j] = static_cast<std::uint8_t>(rng.below(4));
    double wa = 0.0, wb = 0.0;
    for (std::size_t d = 1; d <= depth; ++d) {
      wa += path_extension_weight(d, a, stats, t, priors, c, 0.5);
      wb += path_extension_weight(d, b, stats, t, priors, c, 0.5);
    }
    ASSERT_EQ(wa, wb);
  }
}

TEST(Property, PosteriorsAreNormalized) {
  auto rng = mudtest::make_rng(95);
  const auto c = Constellation::bpsk();
  for (int trial = 0; trial < 200; ++trial) {
    const auto k = static_cast<Eigen::Index>(2 + rng.below(15));
    const auto s = draw_spreading(k, 8, rng);
    const auto noise = ebn0_to_noise(5.0, 0.5, 2, 1.0);
    const auto r = observe(s, mudtest::random_symbols(k, c, rng), noise, rng);
    const auto priors = mudtest::random_priors(2, k, rng);
    const auto list = t_search(matched_filter(r, s), build_transform(s, choose_rho(c, k)), priors, c,
                               SearchParams{16.0, 64, 4, 0}, noise.n0);
    const auto post = list_to_posteriors(list, 2, noise.n0);
    for (Eigen::Index j = 0; j < k; ++j) ASSERT_NEAR(post.values().col(j).sum(), 1.0, 1e-12);
    ASSERT_GE(post.values().minCoeff(), kDefaultFloor);
    ASSERT_LE(list.node_expansions, static_cast<std::uint64_t>(k) * 64u * 2u);
  }
}
