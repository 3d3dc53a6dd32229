#include "ionent/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

using namespace ionent;
using cd = std::complex<double>;

namespace {

const AddressingProfile& ratio_two() {
  static const AddressingProfile p = [] {
    const TrapConfig cfg;
    const double d = solve_displacement_for_ratio(cfg, 2.0);
    const auto unit = addressing_profile(cfg, d, 1.0, 0);
    return addressing_profile(cfg, d, kTwoPi * 225e3 / unit.Omega_1, 0);
  }();
  return p;
}

double eta_prime() { return lamb_dicke_two_ion(0.23); }

// Brute-force equal rotation: each spin by exp(-i theta/2 sigma_x), ion 1
// the more significant index.
double rotated_mixed_population(const SpinMatrix<double>& rho, double theta) {
  const double c = std::cos(theta / 2.0), s = std::sin(theta / 2.0);
  const cd r[2][2] = {{c, cd(0, -s)}, {cd(0, -s), c}};
  SpinMatrix<double> u;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) u(2 * a + b, 2 * x + y) = r[a][x] * r[b][y];
  const SpinMatrix<double> out = u * rho * u.adjoint();
  return out(1, 1).real() + out(2, 2).real();
}

// Removes the global phase that makes amplitude `ref` real and positive.
JointState<double>::Vector dephase(const JointState<double>& s, BasisLabel ref) {
  const cd a = s.amplitude(ref);
  return s.amplitudes() * (std::abs(a) / a);
}

}  // namespace

TEST(Experiments, PrepareBasisReachesEveryLabel) {
  const auto& p = ratio_two();
  EXPECT_TRUE(prepare_basis(TwoSpin::DownDown, p).empty());
  EXPECT_EQ(prepare_basis(TwoSpin::DownUp, p).size(), 1u);
  EXPECT_EQ(prepare_basis(TwoSpin::UpDown, p).size(), 2u);
  EXPECT_EQ(prepare_basis(TwoSpin::UpUp, p).size(), 1u);
  for (TwoSpin label : kTwoSpinBasis) {
    const auto program = prepare_basis(label, p);
    const auto s = apply_sequence(JointState<double>::basis({TwoSpin::DownDown, 0}),
                                  std::span<const PulseSpec>(program), TrialNoise{});
    EXPECT_NEAR(std::norm(s.amplitude({label, 0})), 1.0, 1e-9) << short_name(label);
  }
}

TEST(Experiments, DownUpPulseIsAPiOverOmegaOne) {
  const auto program = prepare_basis(TwoSpin::DownUp, ratio_two());
  // 2.22 us at 225 kHz; a measured optimum near 2.4 us is not modelled.
  EXPECT_NEAR(program[0].duration * ratio_two().Omega_1, std::numbers::pi, 1e-12);
}

TEST(Experiments, PrepareBasisNeedsRatioTwo) {
  EXPECT_THROW(prepare_basis(TwoSpin::DownUp, make_profile(3.0, 1.0, 3.0)), std::domain_error);
  EXPECT_NO_THROW(prepare_basis(TwoSpin::UpUp, make_profile(3.0, 1.0, 3.0)));
}

TEST(Experiments, EntangleGivesPsiE) {
  for (double phi : {0.0, 0.9, std::numbers::pi}) {
    const auto s = entangle(phi, ratio_two(), eta_prime(), NoiseModel::off(), 0);
    const auto want = psi_e(phi);
    const BasisLabel ref{TwoSpin::DownUp, 0};
    EXPECT_LT((dephase(s, ref) - dephase(want, ref)).cwiseAbs().maxCoeff(), 1e-9) << phi;
  }
  const auto s0 = entangle(0.0, ratio_two(), eta_prime(), NoiseModel::off(), 0);
  EXPECT_NEAR(std::norm(overlap(bell_state(BellSign::Minus), s0)), 0.98, 1e-12);
}

TEST(Experiments, BellExactRatio) {
  const TrapConfig cfg;
  const double d = solve_displacement_for_ratio(cfg, 1.0 + std::sqrt(2.0));
  const auto rsb = addressing_profile(cfg, d, ratio_two().Omega_c, 0);
  for (auto [phi, sign] : {std::pair{0.0, BellSign::Minus}, std::pair{std::numbers::pi, BellSign::Plus}}) {
    const auto s = entangle(phi, rsb, eta_prime(), NoiseModel::off(), 0, ratio_two());
    EXPECT_NEAR(std::norm(overlap(bell_state(sign), s)), 1.0, 1e-9);
  }
}

TEST(Experiments, NoisyEnsembleIsStillMostlyMixed) {
  NoiseModel noise;
  noise.rabi_noise_sigma = 0.05;
  const auto rho = entangle_ensemble(0.0, ratio_two(), eta_prime(), noise, 512, 4);
  const auto p = rho.populations();
  EXPECT_GT(p(1) + p(2), 0.7);
  EXPECT_GT(state_fidelity(rho, bell_vector<double>(BellSign::Minus)), 0.75);
  const auto again = entangle_ensemble(0.0, ratio_two(), eta_prime(), noise, 512, 4);
  EXPECT_EQ(rho.matrix(), again.matrix());
}

TEST(Experiments, NoiseOffRabiScanIsTheModel) {
  NoiseModel off = NoiseModel::off();
  const auto grid = linspace(0.0, 10e-6, 41);
  const auto scan = rabi_scan(ratio_two(), off, grid, 1, 0);
  for (const auto& pt : scan.points) {
    EXPECT_NEAR(pt.signal,
                signal_model(pt.abscissa, ratio_two().Omega_1, ratio_two().Omega_2, 0.0, 0.0), 1e-12);
    EXPECT_NEAR(pt.p_mixed + pt.p_pure, 1.0, 1e-12);
  }
  EXPECT_NEAR(scan.param("omega_1").value / ratio_two().Omega_1, 1.0, 1e-6);
  EXPECT_NEAR(scan.param("gamma").value, 0.0, 1.0);
}

TEST(Experiments, RotationMatchesBruteForce) {
  const auto grid = linspace(0.0, std::numbers::pi, 13);
  const Populations<double> p(0.15, 0.4, 0.4, 0.05);
  for (BellSign sign : {BellSign::Minus, BellSign::Plus}) {
    const auto rho = synthesize_rho(0.6, sign, p);
    const auto scan = rotation_scan(rho, grid, 1, std::nullopt, 0);
    for (const auto& pt : scan.points) {
      EXPECT_NEAR(pt.p_mixed, rotated_mixed_population(rho.matrix(), pt.abscissa), 1e-12);
      EXPECT_NEAR(pt.p_mixed + pt.p_pure, 1.0, 1e-12);
    }
    EXPECT_NEAR(scan.param("coherence").value, 0.6, 1e-9);
  }
}

TEST(Experiments, SingletIsFlatTripletHasFullContrast) {
  const auto grid = linspace(0.0, std::numbers::pi, 25);
  const auto singlet = DensityOperator<double>::pure(bell_vector<double>(BellSign::Minus));
  const auto flat = rotation_scan(singlet, grid, 1, std::nullopt, 0);
  double mean = 0.0, var = 0.0;
  for (const auto& pt : flat.points) mean += pt.p_mixed / flat.points.size();
  for (const auto& pt : flat.points) var += std::pow(pt.p_mixed - mean, 2) / flat.points.size();
  EXPECT_NEAR(mean, 1.0, 1e-12);
  EXPECT_LT(var, 1e-10);
  EXPECT_NEAR(flat.param("contrast").value, 0.0, 1e-9);

  const auto triplet = DensityOperator<double>::pure(bell_vector<double>(BellSign::Plus));
  const auto osc = rotation_scan(triplet, grid, 1, std::nullopt, 0);
  EXPECT_NEAR(osc.param("contrast").value, 1.0, 1e-9);
  EXPECT_NEAR(osc.param("coherence").value, 1.0, 1e-9);
  for (const auto& pt : osc.points)
    EXPECT_NEAR(pt.p_mixed, rotated_mixed_population(triplet.matrix(), pt.abscissa), 1e-12);
}

TEST(Experiments, DetectedRotationIsDeterministic) {
  const DetectionModel model = calibrate_depump(DetectionModel{}, 0.1);
  const auto rho = synthesize_rho(0.6, BellSign::Plus, Populations<double>(0.15, 0.4, 0.4, 0.05));
  const auto grid = linspace(0.0, std::numbers::pi, 9);
  const auto a = rotation_scan(rho, grid, 2000, model, 77);
  const auto b = rotation_scan(rho, grid, 2000, model, 77);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_EQ(a.points[i].p_mixed, b.points[i].p_mixed);
    EXPECT_EQ(a.points[i].trials, 2000u);
    EXPECT_NEAR(a.points[i].p_mixed + a.points[i].p_pure, 1.0, 1e-12);
  }
  EXPECT_NEAR(a.param("coherence").value, 0.6, 0.1);
}

TEST(Experiments, FidelityReportExamples) {
  EXPECT_NEAR(fidelity_report({0.15, 0.4, 0.4, 0.05}, 0.6, BellSign::Minus).fidelity, 0.7, 1e-15);
  EXPECT_NEAR(fidelity_report({0.0, 0.5, 0.5, 0.0}, 1.0, BellSign::Plus).fidelity, 1.0, 1e-15);
  EXPECT_NEAR(fidelity_report({0.0, 0.5, 0.5, 0.0}, 0.0, BellSign::Minus).fidelity, 0.5, 1e-15);
  const auto r = fidelity_report({0.15, 0.4, 0.4, 0.05}, 0.6, BellSign::Plus);
  ASSERT_TRUE(r.synthesized_fidelity.has_value());
  EXPECT_NEAR(*r.synthesized_fidelity, r.fidelity, 1e-12);
  EXPECT_FALSE(fidelity_report({0.5, 0.1, 0.1, 0.3}, 0.6, BellSign::Minus).synthesized_fidelity);
}

TEST(Experiments, GammaCalibrationTargetZero) {
  NoiseModel n;
  n.rabi_noise_sigma = 0.3;
  EXPECT_EQ(calibrate_gamma(n, ratio_two(), 0.0).rabi_noise_sigma, 0.0);
  EXPECT_THROW(calibrate_gamma(n, ratio_two(), -1.0), std::domain_error);
}

TEST(Experiments, FittedDecayGrowsWithSigma) {
  const auto grid = linspace(0.0, 10e-6, 61);
  double previous = -1.0;
  for (double sigma : {0.0, 0.03, 0.06, 0.1}) {
    NoiseModel n;
    n.rabi_noise_sigma = sigma;
    const double g = rabi_scan(ratio_two(), n, grid, 300, 9).param("gamma").value;
    EXPECT_GT(g, previous) << "sigma " << sigma;
    previous = g;
  }
}

TEST(Experiments, ScanPointsIndependentOfThreads) {
  // Point i uses seed + i, so a sub-grid reproduces the matching points.
  NoiseModel n;
  n.rabi_noise_sigma = 0.05;
  const auto grid = linspace(0.0, 5e-6, 12);
  const auto full = rabi_scan(ratio_two(), n, grid, 50, 100);
  const std::vector<double> tail(grid.begin() + 6, grid.end());
  const auto part = rabi_scan(ratio_two(), n, tail, 50, 106);
  for (std::size_t i = 0; i < tail.size(); ++i)
    EXPECT_EQ(full.points[6 + i].signal, part.points[i].signal);
}
