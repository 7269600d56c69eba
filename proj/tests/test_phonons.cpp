#include <cmath>

#include <gtest/gtest.h>

#include "tweezer/chain.hpp"
#include "tweezer/phonons.hpp"

namespace {

using namespace tweezer;

struct Pinned130 {
  IonChain chain = solve_equilibrium(calibrate_gamma_for_epsilon(130, 15, 0.07));
  TweezerArray tw{periodic_pinning(130, 6, 15, 17, 0.4, 0.4), std::nullopt};
};

const Pinned130& pinned130() {
  static const Pinned130 p;
  return p;
}

TEST(Modes, OrthonormalInEveryDirection) {
  const auto& s = pinned130();
  for (Direction d : {Direction::x, Direction::y, Direction::z}) {
    const PhononModes m = normal_modes(s.chain, s.tw, d);
    const Eigen::MatrixXd g = m.mode_matrix.transpose() * m.mode_matrix;
    EXPECT_LT((g - Eigen::MatrixXd::Identity(130, 130)).cwiseAbs().maxCoeff(), 1e-10) << to_string(d);
    const Eigen::MatrixXd h = hessian(s.chain, s.tw, d);
    const Eigen::MatrixXd recon = m.mode_matrix * m.freqs.array().square().matrix().asDiagonal() *
                                  m.mode_matrix.transpose();
    EXPECT_LT((recon - h).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Modes, TweezersLeaveYSpectrumUnchanged) {
  const auto& s = pinned130();
  const PhononModes with = normal_modes(s.chain, s.tw, Direction::y);
  const PhononModes without = normal_modes(s.chain, TweezerArray::none(130), Direction::y);
  EXPECT_LT((with.freqs - without.freqs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Modes, CentreOfMassFrequencies) {
  const IonChain c = solve_equilibrium(TrapConfig{6, 0.1, 0.8, 0});
  const PhononModes x = normal_modes(c, TweezerArray::none(6), Direction::x);
  const PhononModes y = normal_modes(c, TweezerArray::none(6), Direction::y);
  const PhononModes z = normal_modes(c, TweezerArray::none(6), Direction::z);
  EXPECT_NEAR(x.freqs[0], 1.0, 1e-12);  // transverse: COM highest
  EXPECT_NEAR(y.freqs[0], 0.8, 1e-12);
  EXPECT_NEAR(z.freqs[0], 0.1, 1e-12);  // axial: COM lowest
  EXPECT_NEAR(z.freqs[1], std::sqrt(3.0) * 0.1, 1e-12);
  // Uniform pinning shifts every transverse mode by nu0^2.
  const PhononModes xp = normal_modes(c, TweezerArray{std::vector<double>(6, 0.3), std::nullopt}, Direction::x);
  for (int n = 0; n < 6; ++n) EXPECT_NEAR(xp.freqs[n] * xp.freqs[n], x.freqs[n] * x.freqs[n] + 0.09, 1e-12);
}

TEST(Modes, SingleIon) {
  const IonChain c = solve_equilibrium(TrapConfig{1, 0.1, 0.8, 0});
  const PhononModes m = normal_modes(c, TweezerArray{{0.4}, std::nullopt}, Direction::x);
  EXPECT_NEAR(m.freqs[0], std::sqrt(1.16), 1e-14);
}

TEST(Modes, PinnedPairsCarryLocalizedModes) {
  const auto& s = pinned130();
  const PhononModes m = normal_modes(s.chain, s.tw, Direction::x);
  // Pairs near the edge of the register hybridize least.
  const LocalizedPair lp = find_localized_pair_modes(m, 15, 16, 0.9);
  EXPECT_GT(m.freqs[lp.com], m.freqs[lp.stretch]);
  const PairFrequencies f = local_pair_frequencies(m, 15, 16);
  EXPECT_NEAR(f.com, m.freqs[lp.com], 2e-3);
  EXPECT_NEAR(f.stretch, m.freqs[lp.stretch], 2e-3);
}

TEST(Modes, SignConventionIsDeterministic) {
  const auto& s = pinned130();
  const PhononModes m = normal_modes(s.chain, s.tw, Direction::x);
  for (int n = 0; n < 130; ++n) {
    Eigen::Index k = 0;
    m.mode_matrix.col(n).cwiseAbs().maxCoeff(&k);
    EXPECT_GT(m.mode_matrix(k, n), 0.0);
  }
}

TEST(Pinning, PatternLayout) {
  const auto nu = periodic_pinning(20, 4, 2, 3, 0.4, 0.36);
  EXPECT_EQ(nu[2], 0.4);
  EXPECT_EQ(nu[3], 0.4);
  EXPECT_EQ(nu[6], 0.36);
  EXPECT_EQ(nu[10], 0.4);
  EXPECT_EQ(nu[4], 0.0);
  EXPECT_THROW(periodic_pinning(10, 4, 2, 3, 0.4, 0.4), ConfigError);
}

}  // namespace
