#include "ionent/dynamics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

using namespace ionent;
using cd = std::complex<double>;

namespace {

// Closed-form red-sideband evolution on {dd1, du0, ud0}. With g_i the ion
// couplings, H = G (|b><dd1| + h.c.), b = (g1 e^{i p1} |ud0> + g2 e^{i p2} |du0>) / G,
// so exp(-iHt) = 1 - P + cos(Gt) P - i sin(Gt) (|b><dd1| + |dd1><b|) with
// P = |b><b| + |dd1><dd1|.
struct Manifold {
  cd dd1, du0, ud0;
};

Manifold closed_form(const Manifold& in, double g1, double g2, double p1, double p2, double t) {
  const double G = std::hypot(g1, g2);
  const cd b_ud = g1 * std::polar(1.0, p1) / G;
  const cd b_du = g2 * std::polar(1.0, p2) / G;
  const cd b_in = std::conj(b_ud) * in.ud0 + std::conj(b_du) * in.du0;  // <b|in>
  const double c = std::cos(G * t), s = std::sin(G * t);
  Manifold out;
  out.dd1 = c * in.dd1 - cd(0, 1) * s * b_in;
  out.du0 = in.du0 + (c - 1.0) * b_du * b_in - cd(0, 1) * s * b_du * in.dd1;
  out.ud0 = in.ud0 + (c - 1.0) * b_ud * b_in - cd(0, 1) * s * b_ud * in.dd1;
  return out;
}

JointState<double> embed(const Manifold& m) {
  JointState<double>::Vector v = JointState<double>::Vector::Zero(16);
  v(JointState<double>::index({TwoSpin::DownDown, 1}, 4)) = m.dd1;
  v(JointState<double>::index({TwoSpin::DownUp, 0}, 4)) = m.du0;
  v(JointState<double>::index({TwoSpin::UpDown, 0}, 4)) = m.ud0;
  return JointState<double>::from_amplitudes(v, 4);
}

template <typename M>
double unitarity_error(const M& u) {
  return (u.adjoint() * u - M::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Dynamics, RedSidebandMatchesClosedForm) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const double omega_1 = kTwoPi * (50e3 + 400e3 * u(rng));
    const double omega_2 = kTwoPi * (10e3 + 400e3 * u(rng));
    const double eta = 0.05 + 0.2 * u(rng);
    const double phi = kTwoPi * u(rng), drive = kTwoPi * u(rng);
    const double t = 40e-6 * u(rng);
    Manifold in{cd(u(rng), u(rng)), cd(u(rng), u(rng)), cd(u(rng), u(rng))};
    const double norm = std::sqrt(std::norm(in.dd1) + std::norm(in.du0) + std::norm(in.ud0));
    in = {in.dd1 / norm, in.du0 / norm, in.ud0 / norm};

    const auto U = rsb_unitary(make_profile(omega_1, omega_2, std::max(omega_1, omega_2)), eta, phi, t, 4, drive);
    const JointState<double>::Vector got = U * embed(in).amplitudes();
    const auto want = embed(closed_form(in, eta * omega_1, eta * omega_2, drive + phi, drive, t));
    worst = std::max(worst, (got - want.amplitudes()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Dynamics, UnitariesAreUnitary) {
  const auto p = make_profile(kTwoPi * 225e3, kTwoPi * 112.5e3, kTwoPi * 260e3);
  EXPECT_LT(unitarity_error(rsb_unitary(p, 0.12, 0.3, 7e-6)), 1e-12);
  EXPECT_LT(unitarity_error(carrier_unitary(p.Omega_1, p.Omega_2, 3e-6, 0.4, 4)), 1e-12);
  EXPECT_LT(unitarity_error(carrier_spin_unitary(1.0, 2.0, 0.7, 1.1)), 1e-14);
}

TEST(Dynamics, CarrierFlipProbability) {
  const double omega = 2.0;
  for (double t : {0.1, 0.5, 1.3}) {
    const auto u = single_spin_rotation(omega, t, 0.25);
    EXPECT_NEAR(std::norm(u(1, 0)), std::pow(std::sin(omega * t), 2), 1e-14);
  }
  // Omega t = pi is a 2 pi pulse: the identity up to sign.
  const auto full = single_spin_rotation(1.0, std::numbers::pi, 0.0);
  EXPECT_NEAR(std::abs(full(0, 0) + 1.0), 0.0, 1e-15);
}

TEST(Dynamics, EqualRotationLeavesSingletInvariant) {
  const auto singlet = bell_state(BellSign::Minus);
  for (double theta : {0.3, 1.0, 2.2}) {
    const auto rotated = apply_spin_operator(carrier_spin_unitary(1.0, 1.0, theta / 2.0), singlet);
    EXPECT_NEAR(std::norm(overlap(singlet, rotated)), 1.0, 1e-14);
  }
}

TEST(Dynamics, TwoPiPiPulsePreparesDownUp) {
  const auto p = make_profile(2.0, 1.0, 2.0);
  PulseSpec pulse;
  pulse.kind = PulseKind::XCarrier;
  pulse.duration = std::numbers::pi / p.Omega_1;
  pulse.addressing = p;
  const auto out = apply_pulse(JointState<double>::basis({TwoSpin::DownDown, 0}), pulse, TrialNoise{});
  EXPECT_NEAR(std::norm(out.amplitude({TwoSpin::DownUp, 0})), 1.0, 1e-14);
}

TEST(Dynamics, TruncationLeakageIsAnError) {
  PulseSpec rsb;
  rsb.kind = PulseKind::RedSideband;
  rsb.duration = 1e-6;
  rsb.addressing = make_profile(kTwoPi * 200e3, kTwoPi * 100e3, kTwoPi * 200e3);
  rsb.eta_prime = 0.12;
  // ud at n = 3: the sideband would need n = 4.
  const auto edge = JointState<double>::basis({TwoSpin::UpDown, 3});
  EXPECT_THROW(apply_pulse(edge, rsb, TrialNoise{}), TruncationError);
  EXPECT_THROW(raise_stretch(JointState<double>::basis({TwoSpin::DownDown, 3}), 1), TruncationError);
  // A ladder that fits stays exact.
  const auto inside = JointState<double>::basis({TwoSpin::DownDown, 3});
  EXPECT_NO_THROW(apply_pulse(inside, rsb, TrialNoise{}));
}

TEST(Dynamics, FluorescenceAtTimeZeroAndNoiseOffSignal) {
  const double alpha = -0.05;
  EXPECT_NEAR(signal_model(0.0, 2.0, 1.0, 0.0, alpha), 2.0, 1e-15);

  // Independent oracle: each ion flips with probability sin^2(Omega_i t);
  // ion 1 scatters (1 + alpha), ion 2 (1 - alpha) when still down.
  const double w1 = kTwoPi * 225e3, w2 = kTwoPi * 112.5e3;
  const auto p = make_profile(w1, w2, w1);
  for (double t : {0.3e-6, 1.7e-6, 4.1e-6}) {
    PulseSpec pulse;
    pulse.duration = t;
    pulse.addressing = p;
    const auto s = apply_pulse(JointState<double>::basis({TwoSpin::DownDown, 0}), pulse, TrialNoise{});
    const double down_1 = std::pow(std::cos(w1 * t), 2), down_2 = std::pow(std::cos(w2 * t), 2);
    const double expected = (1 + alpha) * down_1 + (1 - alpha) * down_2;
    EXPECT_NEAR(fluorescence_expectation(s, alpha), expected, 1e-12);
    EXPECT_NEAR(signal_model(t, w1, w2, 0.0, alpha), expected, 1e-12);
  }
}

TEST(Dynamics, DoublingRabiFrequenciesHalvesTime) {
  for (double t : {0.2, 0.9, 2.5})
    EXPECT_NEAR(signal_model(t / 2.0, 4.0, 2.0, 0.0, 0.0), signal_model(t, 2.0, 1.0, 0.0, 0.0), 1e-14);
}

TEST(Dynamics, SameSeedSameTrial) {
  NoiseModel noise;
  noise.rabi_noise_sigma = 0.1;
  std::vector<PulseSpec> program(1);
  program[0].duration = 2e-6;
  program[0].addressing = make_profile(kTwoPi * 225e3, kTwoPi * 112.5e3, kTwoPi * 225e3);
  const auto start = JointState<double>::basis({TwoSpin::DownDown, 0});
  const auto a = apply_sequence(start, std::span<const PulseSpec>(program), noise, 42);
  const auto b = apply_sequence(start, std::span<const PulseSpec>(program), noise, 42);
  const auto c = apply_sequence(start, std::span<const PulseSpec>(program), noise, 43);
  EXPECT_EQ(a.amplitudes(), b.amplitudes());
  EXPECT_NE(a.amplitudes(), c.amplitudes());
}

TEST(Dynamics, NoiseDrawsAreOrdered) {
  // The same seed gives the same normal deviate whatever sigma is.
  NoiseModel a, b;
  a.rabi_noise_sigma = 0.01;
  b.rabi_noise_sigma = 0.02;
  Rng ra = make_rng(5, 0), rb = make_rng(5, 0);
  const auto ta = sample_trial_noise(a, ra), tb = sample_trial_noise(b, rb);
  EXPECT_NEAR(tb.rabi_multiplier - 1.0, 2.0 * (ta.rabi_multiplier - 1.0), 1e-15);
  EXPECT_EQ(ta.initial_stretch_n, tb.initial_stretch_n);
  EXPECT_EQ(ta.com_n, tb.com_n);
}

TEST(Dynamics, NoiseValidation) {
  NoiseModel n;
  n.alpha = 0.3;
  EXPECT_THROW(n.validate(), std::invalid_argument);
  n = NoiseModel{};
  n.stretch_ground_prob = 1.2;
  EXPECT_THROW(n.validate(), std::invalid_argument);
  PulseSpec p;
  p.kind = PulseKind::RedSideband;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}
