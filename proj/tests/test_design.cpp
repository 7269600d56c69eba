#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "tweezer/chain.hpp"
#include "tweezer/design.hpp"

namespace {

using namespace tweezer;

DesignSpec quick_spec(ModeChoice m) {
  DesignSpec s;
  s.mode = m;
  s.k_points = 64;
  s.crosstalk_cells = 12;
  return s;
}

TEST(DesignInfinite, StretchGateClosesBothLoops) {
  const CellConfig cell;
  const InfiniteDesign d = design_infinite(cell, quick_spec(ModeChoice::stretch));
  EXPECT_NEAR(d.tau, 2.0 * std::numbers::pi / (d.nu_com - d.nu_stretch), 1e-12);
  EXPECT_NEAR(d.mu_seed, 2.0 * d.nu_stretch - d.nu_com, 1e-15);
  EXPECT_GT(d.mu, d.mu_lo);
  EXPECT_LT(d.mu, d.mu_hi);
  // The target coupling is met exactly by the chosen amplitude.
  EXPECT_NEAR(std::abs(d.result.report.chi(0, 1)), std::numbers::pi / 4, 1e-10);
  EXPECT_LT(d.result.report.delta_chi, 1e-9);
  // The scan minimum is no worse than any sampled detuning.
  for (const auto& [mu, v] : d.scan) EXPECT_LE(d.result.report.deltaF, v * (1 + 1e-6) + 1e-15);
}

TEST(DesignInfinite, ComGateSitsAboveTheComBand) {
  const CellConfig cell;
  const InfiniteDesign d = design_infinite(cell, quick_spec(ModeChoice::com));
  EXPECT_GT(d.mu, d.nu_com);
  EXPECT_NEAR(d.mu_seed, 2.0 * d.nu_com - d.nu_stretch, 1e-15);
}

TEST(DesignInfinite, WeakPinningIsRejected) {
  CellConfig cell;
  cell.nu0 = 0.01;
  EXPECT_THROW(design_infinite(cell, quick_spec(ModeChoice::stretch)), NumericError);
}

TEST(DesignInfinite, BadSpecThrows) {
  DesignSpec s;
  s.scan_halfwidth = 1.5;
  EXPECT_THROW(design_infinite(CellConfig{}, s), ConfigError);
}

TEST(Sweep, LoglogSlopeOfPowerLaw) {
  std::vector<double> x{0.1, 0.2, 0.4}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -2.0));
  EXPECT_NEAR(loglog_slope(x, y), -2.0, 1e-12);
}

TEST(Sweep, DeltaFDecreasesWithPinning) {
  const SweepResult r = sweep_performance(6, {0.07}, {0.2, 0.4}, quick_spec(ModeChoice::stretch));
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_FALSE(r.points[0].failed);
  EXPECT_GT(r.points[0].deltaF, r.points[1].deltaF);
  // The COM-stretch splitting scales as epsilon^2 / nu, so weaker pinning is faster.
  EXPECT_LT(r.points[0].tau, r.points[1].tau);
}

TEST(DesignFinite, SmallChainGatesHitTheirTargets) {
  const int n = 40;
  const IonChain chain = solve_equilibrium(calibrate_gamma_for_epsilon(n, 4, 0.07, 0.8));
  const TweezerArray tw{periodic_pinning(n, 6, 7, 4, 0.4, 0.4), std::nullopt};
  const auto pairs = periodic_pairs(7, 6, 4);
  const FiniteDesign d = design_finite(chain, tw, pairs, quick_spec(ModeChoice::stretch));
  ASSERT_EQ(d.pairs.size(), 4u);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    EXPECT_NEAR(std::abs(d.report.chi(a, b)), std::numbers::pi / 4, 0.05);
    EXPECT_GT(d.pairs[k].stretch_overlap, 0.5);  // stretch modes of equal pairs hybridize
  }
  EXPECT_LT(d.report.deltaF, 1e-2);
  EXPECT_FALSE(d.in_register[0]);
  EXPECT_TRUE(d.in_register[20]);
}

TEST(DesignFinite, UnpinnedPairIsRejected) {
  const IonChain chain = solve_equilibrium(TrapConfig{12, 0.1, 0.8, 0});
  EXPECT_THROW(design_finite(chain, TweezerArray::none(12), {{3, 4}}, quick_spec(ModeChoice::stretch)), ConfigError);
}

}  // namespace
