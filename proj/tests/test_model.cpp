#include <gtest/gtest.h>

#include <cmath>

#include "common.hpp"
#include "mud/fec.hpp"
#include "mud/model.hpp"

using namespace mud;

TEST(EbN0, BenchmarkPoint) {
  const auto n = ebn0_to_noise(5.0, 0.5, 2, 1.0);
  EXPECT_NEAR(n.sigma2, std::pow(10.0, -0.5), 1e-15);
  EXPECT_NEAR(n.sigma2, 0.316228, 1e-6);
  EXPECT_NEAR(n.n0, 0.632456, 1e-6);
  EXPECT_EQ(n.n0, 2.0 * n.sigma2);
}

TEST(EbN0, UnitPoint) {
  const auto n = ebn0_to_noise(0.0, 1.0, 2, 1.0);
  EXPECT_DOUBLE_EQ(n.sigma2, 0.5);
  EXPECT_DOUBLE_EQ(n.n0, 1.0);
}

TEST(EbN0, TwoBitsPerSymbol) {
  EXPECT_NEAR(ebn0_to_noise(5.0, 0.5, 4, 1.0).sigma2, 0.158114, 1e-6);
}

TEST(EbN0, RejectsBadArguments) {
  EXPECT_THROW(ebn0_to_noise(5.0, 0.0, 2, 1.0), Error);
  EXPECT_THROW(ebn0_to_noise(5.0, 0.5, 2, -1.0), Error);
  EXPECT_THROW(ebn0_to_noise(5.0, 1.5, 2, 1.0), Error);
}

TEST(Constellation, MomentsAndLabels) {
  for (const auto& c : {Constellation::bpsk(), Constellation::qpsk(), Constellation::qam16()}) {
    Complex mean{};
    double energy = 0.0;
    for (const auto& p : c.points()) {
      mean += p;
      energy += std::norm(p);
    }
    EXPECT_LT(std::abs(mean) / static_cast<double>(c.size()), 1e-12);
    EXPECT_NEAR(energy / static_cast<double>(c.size()), 1.0, 1e-12);
  }
  const auto b = Constellation::bpsk(4.0);
  EXPECT_EQ(b[0], Complex(2.0, 0.0));
  EXPECT_EQ(b[1], Complex(-2.0, 0.0));
  EXPECT_TRUE(b.is_real());
  EXPECT_FALSE(Constellation::qpsk().is_real());
  EXPECT_EQ(Constellation::qam16().label_bit(0b1000, 0), 1);
  EXPECT_EQ(Constellation::qam16().label_bit(0b1000, 3), 0);
}

TEST(Constellation, RejectsInvalidAlphabets) {
  EXPECT_THROW(Constellation({Complex(1, 0), Complex(-1, 0), Complex(0.5, 0)}), Error);
  EXPECT_THROW(Constellation({Complex(1, 0), Complex(1, 0)}), Error);
  EXPECT_THROW(Constellation({Complex(1, 0), Complex(2, 0)}), Error);
}

TEST(Spreading, BenchmarkChips) {
  auto rng = mudtest::make_rng(1);
  const auto s = draw_spreading(20, 8, rng);
  const double chip = 1.0 / std::sqrt(8.0);
  EXPECT_NEAR(chip, 0.353553, 1e-6);
  for (Eigen::Index l = 0; l < 8; ++l)
    for (Eigen::Index k = 0; k < 20; ++k) EXPECT_EQ(std::abs(s.chips()(l, k)), chip);
  for (Eigen::Index k = 0; k < 20; ++k) EXPECT_NEAR(s.column(k).norm(), 1.0, 1e-12);
}

TEST(Spreading, SingleColumnHasUnitNorm) {
  auto rng = mudtest::make_rng(2);
  EXPECT_NEAR(draw_spreading(1, 4, rng).column(0).norm(), 1.0, 1e-12);
}

TEST(Spreading, SameStreamSameMatrix) {
  Rng a(77, 3, StreamPurpose::Spreading);
  Rng b(77, 3, StreamPurpose::Spreading);
  EXPECT_EQ(draw_spreading(8, 8, a).chips(), draw_spreading(8, 8, b).chips());
}

TEST(Spreading, GramDiagonalIsOne) {
  auto rng = mudtest::make_rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = draw_spreading(12, 8, rng);
    const Eigen::MatrixXd g = s.chips().transpose() * s.chips();
    EXPECT_LT((g.diagonal().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
}

TEST(Rng, StreamsAreIndependentOfEachOther) {
  Rng a(5, 0, StreamPurpose::Noise);
  Rng b(5, 1, StreamPurpose::Noise);
  Rng c(5, 0, StreamPurpose::Spreading);
  const auto x = a.next();
  EXPECT_NE(x, b.next());
  EXPECT_NE(x, c.next());
}

TEST(Rng, BoundedAndUniformRanges) {
  auto rng = mudtest::make_rng(4);
  for (int i = 0; i < 10000; ++i) {
    EXPECT_LT(rng.below(7), 7u);
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Encode, AllZeroInfoGivesPositiveSymbols) {
  const auto code = ConvCode::benchmark();
  const std::vector<Bits> info(2, Bits(10, 0));
  const std::vector<Interleaver> pi(2, Interleaver::identity(20));
  const auto frame = encode_and_modulate(info, code, pi, Constellation::bpsk());
  ASSERT_EQ(frame.uses, 20u);
  for (std::size_t n = 0; n < frame.uses; ++n)
    for (Eigen::Index k = 0; k < 2; ++k) EXPECT_EQ(Constellation::bpsk()[frame.at(n, k)], Complex(1.0, 0.0));
}

TEST(Encode, BenchmarkFrameLength) {
  const auto code = ConvCode::benchmark();
  auto rng = mudtest::make_rng(5);
  Bits info(500);
  for (auto& b : info) b = rng.bit();
  const std::vector<Interleaver> pi{Interleaver::random(1000, rng)};
  const auto frame = encode_and_modulate({info}, code, pi, Constellation::bpsk());
  EXPECT_EQ(frame.uses, 1000u);
  EXPECT_EQ(frame.mapped_bits[0].size(), 1000u);
}

TEST(Encode, HandTrellis) {
  // 05 = 1 + D^2, 07 = 1 + D + D^2, outputs interleaved per step
  const auto code = ConvCode::benchmark();
  EXPECT_EQ(code.encode({1, 0}), (Bits{1, 1, 0, 1}));
  EXPECT_EQ(code.encode({1, 1}), (Bits{1, 1, 1, 0}));
  EXPECT_EQ(code.encode({0, 1}), (Bits{0, 0, 1, 1}));
  const auto frame = encode_and_modulate({{1, 0}}, code, {Interleaver::identity(4)}, Constellation::bpsk());
  EXPECT_EQ(frame.mapped_bits[0], (Bits{1, 1, 0, 1}));
  EXPECT_EQ(frame.at(0, 0), 1);
  EXPECT_EQ(frame.at(2, 0), 0);
}

TEST(Encode, LengthMismatchIsReported) {
  const auto code = ConvCode::benchmark();
  try {
    encode_and_modulate({{1, 0, 1}}, code, {Interleaver::identity(4)}, Constellation::bpsk());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(Channel, NoiselessLimit) {
  auto rng = mudtest::make_rng(6);
  const auto s = draw_spreading(6, 8, rng);
  const auto c = Constellation::bpsk();
  const auto d = mudtest::random_symbols(6, c, rng);
  const auto r = observe(s, d, NoiseSpec::from_sigma2(1e-30), rng);
  EXPECT_LT((r - s.chips() * d).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Channel, SingleUserMean) {
  Eigen::MatrixXd col = Eigen::MatrixXd::Constant(4, 1, 0.5);
  const SpreadingMatrix s(col);
  auto rng = mudtest::make_rng(7);
  Eigen::VectorXcd d(1);
  d << Complex(1.0, 0.0);
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(4);
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += observe(s, d, NoiseSpec::from_sigma2(0.1), rng);
  for (Eigen::Index l = 0; l < 4; ++l) EXPECT_NEAR(sum(l).real() / n, 0.5, 0.01);
}

TEST(Channel, NoiseMomentsPerRealDimension) {
  auto rng = mudtest::make_rng(8);
  const auto s = draw_spreading(4, 4, rng);
  const auto c = Constellation::bpsk();
  const double sigma2 = 0.3;
  const auto d = mudtest::random_symbols(4, c, rng);
  const Eigen::VectorXcd clean = s.chips() * d;
  double sum_re = 0.0, sum_im = 0.0, sq_re = 0.0, sq_im = 0.0;
  std::size_t count = 0;
  for (int i = 0; i < 25000; ++i) {
    const Eigen::VectorXcd z = observe(s, d, NoiseSpec::from_sigma2(sigma2), rng) - clean;
    for (Eigen::Index l = 0; l < z.size(); ++l) {
      sum_re += z(l).real();
      sum_im += z(l).imag();
      sq_re += z(l).real() * z(l).real();
      sq_im += z(l).imag() * z(l).imag();
      ++count;
    }
  }
  const double nn = static_cast<double>(count);
  // 3-sigma bands for n = 1e5 samples
  EXPECT_NEAR(sum_re / nn, 0.0, 3.0 * std::sqrt(sigma2 / nn));
  EXPECT_NEAR(sum_im / nn, 0.0, 3.0 * std::sqrt(sigma2 / nn));
  EXPECT_NEAR(sq_re / nn / sigma2, 1.0, 0.03);
  EXPECT_NEAR(sq_im / nn / sigma2, 1.0, 0.03);
}

TEST(Channel, SimulateMatchesObservePerUse) {
  const auto code = ConvCode::benchmark();
  const auto c = Constellation::bpsk();
  auto rng = mudtest::make_rng(9);
  const auto s = draw_spreading(3, 4, rng);
  const std::vector<Bits> info(3, Bits{1, 0, 1, 1});
  const std::vector<Interleaver> pi(3, Interleaver::identity(8));
  const auto frame = encode_and_modulate(info, code, pi, c);
  Rng a(1, 2, StreamPurpose::Noise), b(1, 2, StreamPurpose::Noise);
  const auto obs = simulate_channel(s, frame, c, NoiseSpec::from_sigma2(0.2), a);
  ASSERT_EQ(obs.size(), frame.uses);
  for (std::size_t n = 0; n < frame.uses; ++n)
    EXPECT_EQ(obs[n], observe(s, frame.symbol_vector(n, c), NoiseSpec::from_sigma2(0.2), b));
}
