#include <cmath>

#include <gtest/gtest.h>

#include "tweezer/fock_oracle.hpp"

namespace {

using namespace tweezer;

// Two ions, two modes, four segments; the second ion stops early so the
// unequal-window path of the kernel is covered too.
struct TwoIon {
  ModeSet modes;
  PulseSchedule sched;

  explicit TwoIon(double scale = 1.0) {
    modes.freqs = Eigen::Vector2d(1.0, 0.98);
    modes.vectors.resize(2, 2);
    modes.vectors << 1, 1, 1, -1;
    modes.vectors /= std::sqrt(2.0);
    sched = PulseSchedule::empty(2, 300.0, 4);
    Eigen::VectorXd r0(4), r1(4);
    r0 << 0.002, -0.004, 0.003, 0.001;
    r1 << 0.0024, -0.002, 0.004, 0.0006;
    sched.set_ion(0, 0.97, scale * r0);
    sched.set_ion(1, 0.965, scale * r1, 250.0);
  }
};

class FockOracle : public ::testing::TestWithParam<double> {};

TEST_P(FockOracle, CouplingMatchesClosedForm) {
  const TwoIon sys;
  FockOracleSpec spec;
  spec.n_th = GetParam();
  const double chi = chi_pair(sys.modes, sys.sched, 0, 1);
  const FockOracleResult r = fock_oracle(sys.modes, sys.sched, chi, spec);
  EXPECT_NEAR(r.chi, chi, 1e-4 * std::abs(chi));
  EXPECT_LT(r.top_population, 1e-10);
}

TEST_P(FockOracle, InfidelityMatchesLeadingOrder) {
  // Weak drive so that second-order terms in |alpha|^2 stay negligible.
  const TwoIon sys(0.1);
  FockOracleSpec spec;
  spec.n_th = GetParam();
  const double chi = chi_pair(sys.modes, sys.sched, 0, 1);
  const Eigen::MatrixXcd a = alpha_matrix(sys.modes, sys.sched);
  const double predicted = 0.8 * a.cwiseAbs2().sum() * (2.0 * spec.n_th + 1.0);
  const FockOracleResult r = fock_oracle(sys.modes, sys.sched, chi, spec);
  EXPECT_NEAR(1.0 - r.fidelity, predicted, 1e-4 * predicted + 1e-2 * predicted);
}

INSTANTIATE_TEST_SUITE_P(Thermal, FockOracle, ::testing::Values(0.0, 0.5));

TEST(FockOracleSpecTest, RejectsBadTruncation) {
  const TwoIon sys;
  FockOracleSpec spec;
  spec.fock_dim = 8;
  EXPECT_THROW(fock_oracle(sys.modes, sys.sched, 0.0, spec), ConfigError);
}

}  // namespace
