#include "ionent/hilbert.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <stdexcept>

using namespace ionent;
using cd = std::complex<double>;

TEST(Hilbert, IndexLayout) {
  EXPECT_EQ(index_of(TwoSpin::DownDown), 0);
  EXPECT_EQ(index_of(two_spin(Spin::Down, Spin::Up)), 1);
  EXPECT_EQ(index_of(two_spin(Spin::Up, Spin::Down)), 2);
  EXPECT_EQ(index_of(TwoSpin::UpUp), 3);
  EXPECT_EQ(JointState<double>::index({TwoSpin::UpDown, 3}, 4), 11);
  EXPECT_EQ(up_count(TwoSpin::UpUp), 2);
}

TEST(Hilbert, PsiEOverlapWithBellIsFortyNineFiftieths) {
  // |<B-|psi_e(0)>|^2 = ((3/5 + 4/5) / sqrt 2)^2 = 49/50.
  const auto e0 = psi_e(0.0);
  EXPECT_NEAR(std::norm(overlap(bell_state(BellSign::Minus), e0)), 49.0 / 50.0, 1e-15);
  const auto epi = psi_e(std::numbers::pi);
  EXPECT_NEAR(std::norm(overlap(bell_state(BellSign::Plus), epi)), 49.0 / 50.0, 1e-15);
  EXPECT_NEAR(std::norm(overlap(bell_state(BellSign::Minus), epi)), 1.0 / 50.0, 1e-15);
}

TEST(Hilbert, PsiEAmplitudes) {
  const double phi = 0.7;
  const auto s = psi_e(phi);
  EXPECT_NEAR(std::abs(s.amplitude({TwoSpin::DownUp, 0}) - cd(0.6, 0.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(s.amplitude({TwoSpin::UpDown, 0}) + 0.8 * std::polar(1.0, phi)), 0.0, 1e-15);
}

TEST(Hilbert, FromAmplitudesChecksNorm) {
  JointState<double>::Vector v = JointState<double>::Vector::Zero(16);
  v(0) = 1.1;
  EXPECT_THROW(JointState<double>::from_amplitudes(v, 4), std::invalid_argument);
  v(0) = 1.0;
  EXPECT_NO_THROW(JointState<double>::from_amplitudes(v, 4));
  EXPECT_THROW(JointState<double>::from_amplitudes(v, 3), std::invalid_argument);
  EXPECT_THROW(JointState<double>::basis({TwoSpin::DownDown, 4}, 4), std::out_of_range);
}

TEST(Hilbert, OverlapRejectsMismatchedSpaces) {
  EXPECT_THROW(overlap(psi_e(0.0, 4), psi_e(0.0, 5)), std::invalid_argument);
}

TEST(Hilbert, DensityOperatorValidation) {
  SpinMatrix<double> m = SpinMatrix<double>::Zero();
  m(0, 0) = 1.0;
  EXPECT_NO_THROW(DensityOperator<double>::from_matrix(m));
  m(0, 1) = cd(0.0, 0.1);  // not Hermitian
  EXPECT_THROW(DensityOperator<double>::from_matrix(m), std::invalid_argument);
  m = SpinMatrix<double>::Zero();
  m(0, 0) = 0.9;
  EXPECT_THROW(DensityOperator<double>::from_matrix(m), std::invalid_argument);
  m(0, 0) = 1.5;
  m(1, 1) = -0.5;
  EXPECT_THROW(DensityOperator<double>::from_matrix(m), std::invalid_argument);
}

TEST(Hilbert, ReduceTracesOutMotion) {
  // (|du,0> + |du,1>)/sqrt 2 is a product state: spins pure in du.
  JointState<double>::Vector v = JointState<double>::Vector::Zero(16);
  v(JointState<double>::index({TwoSpin::DownUp, 0}, 4)) = 1.0 / std::sqrt(2.0);
  v(JointState<double>::index({TwoSpin::DownUp, 1}, 4)) = 1.0 / std::sqrt(2.0);
  const auto rho = reduce(JointState<double>::from_amplitudes(v, 4));
  EXPECT_NEAR(rho.matrix()(1, 1).real(), 1.0, 1e-15);
  EXPECT_NEAR(rho.matrix().trace().real(), 1.0, 1e-15);

  // Spin-motion entanglement removes spin coherence.
  v.setZero();
  v(JointState<double>::index({TwoSpin::DownUp, 0}, 4)) = 1.0 / std::sqrt(2.0);
  v(JointState<double>::index({TwoSpin::UpDown, 1}, 4)) = 1.0 / std::sqrt(2.0);
  const auto mixed = reduce(JointState<double>::from_amplitudes(v, 4));
  EXPECT_NEAR(std::abs(mixed.matrix()(1, 2)), 0.0, 1e-15);
  EXPECT_NEAR(mixed.populations()(1), 0.5, 1e-15);
}

TEST(Hilbert, SynthesizedOperatorHasRequestedPopulationsAndFidelity) {
  const Populations<double> p(0.15, 0.4, 0.4, 0.05);
  for (BellSign sign : {BellSign::Minus, BellSign::Plus}) {
    const auto rho = synthesize_rho(0.6, sign, p);
    EXPECT_LT((rho.populations() - p).cwiseAbs().maxCoeff(), 1e-15);
    // <B|rho|B> = (P_du + P_ud)/2 +- Re rho_du,ud = (P_du + P_ud + C)/2.
    EXPECT_NEAR(state_fidelity(rho, bell_vector<double>(sign)), 0.7, 1e-12);
    const BellSign other = sign == BellSign::Minus ? BellSign::Plus : BellSign::Minus;
    EXPECT_NEAR(state_fidelity(rho, bell_vector<double>(other)), 0.1, 1e-12);
  }
}

TEST(Hilbert, SynthesizeRejectsInfeasibleTargets) {
  EXPECT_THROW(synthesize_rho(0.9, BellSign::Minus, Populations<double>(0.2, 0.4, 0.4, 0.0)),
               std::domain_error);
  EXPECT_THROW(synthesize_rho(0.5, BellSign::Minus, Populations<double>(0.2, 0.4, 0.4, 0.1)),
               std::domain_error);
  EXPECT_THROW(synthesize_rho(1.5, BellSign::Minus, Populations<double>(0.0, 0.5, 0.5, 0.0)),
               std::domain_error);
}

TEST(Hilbert, PureBellSynthesis) {
  const auto rho = synthesize_rho(1.0, BellSign::Minus, Populations<double>(0.0, 0.5, 0.5, 0.0));
  const auto pure = DensityOperator<double>::pure(bell_vector<double>(BellSign::Minus));
  EXPECT_LT((rho.matrix() - pure.matrix()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Hilbert, DumpListsNonzeroAmplitudes) {
  const std::string text = dump(psi_e(0.0, 2));
  EXPECT_NE(text.find("du 0\t0.59999999999999998\t0"), std::string::npos);
  EXPECT_NE(text.find("ud 0\t-0.80000000000000004\t"), std::string::npos);
  int lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, 2);
}
