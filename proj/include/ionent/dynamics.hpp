#pragma once

#include "ionent/errors.hpp"
#include "ionent/hilbert.hpp"
#include "ionent/random.hpp"
#include "ionent/trap.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <string>

namespace ionent {

enum class PulseKind { XCarrier, CoCarrier, RedSideband };

struct PulseSpec {
  PulseKind kind = PulseKind::XCarrier;
  double duration = 0.0;  // s
  double drive_phase = 0.0;
  AddressingProfile addressing;
  double entangle_phase_phi = 0.0;  // RedSideband only
  double eta_prime = 0.0;           // RedSideband only

  void validate() const {
    if (!(duration >= 0.0)) throw std::invalid_argument("PulseSpec: duration must be >= 0");
    if (kind == PulseKind::RedSideband && !(eta_prime > 0.0 && eta_prime < 1.0))
      throw std::invalid_argument("PulseSpec: red-sideband pulse needs eta' in (0, 1)");
  }
};

// Per-trial imperfections. gamma is the fitted Rabi-signal decay rate the noise is
// meant to reproduce; it is not applied to the amplitudes directly.
struct NoiseModel {
  double gamma = 0.0;             // rad/s
  double rabi_noise_sigma = 0.0;  // relative
  double stretch_ground_prob = 0.99;
  double com_nbar = 0.3;
  double com_eta = 0.23 / std::numbers::sqrt2;
  double alpha = -0.05;

  static NoiseModel off() {
    NoiseModel n;
    n.stretch_ground_prob = 1.0;
    n.com_nbar = 0.0;
    n.alpha = 0.0;
    return n;
  }

  void validate() const {
    if (!(gamma >= 0.0)) throw std::invalid_argument("NoiseModel: gamma must be >= 0");
    if (!(rabi_noise_sigma >= 0.0)) throw std::invalid_argument("NoiseModel: sigma must be >= 0");
    if (!(stretch_ground_prob >= 0.0 && stretch_ground_prob <= 1.0))
      throw std::invalid_argument("NoiseModel: stretch_ground_prob must lie in [0, 1]");
    if (!(com_nbar >= 0.0)) throw std::invalid_argument("NoiseModel: com_nbar must be >= 0");
    if (!(com_eta >= 0.0 && com_eta < 1.0))
      throw std::invalid_argument("NoiseModel: com_eta must lie in [0, 1)");
    if (!(std::abs(alpha) <= 0.2)) throw std::invalid_argument("NoiseModel: |alpha| must be <= 0.2");
  }
};

// One draw of the noise ledger.
struct TrialNoise {
  double rabi_multiplier = 1.0;
  int initial_stretch_n = 0;
  int com_n = 0;
  double com_eta = 0.0;

  // x-beam Raman pulses see the COM Debye-Waller factor; the co-propagating
  // pair (delta k ~ 0) does not.
  double x_beam_factor() const {
    return rabi_multiplier * std::max(0.0, 1.0 - com_eta * com_eta * com_n);
  }
  double co_beam_factor() const { return rabi_multiplier; }
};

/// Draws always happen in the same order, so trials that share a seed see the
/// same normal deviate for any sigma.
inline TrialNoise sample_trial_noise(const NoiseModel& noise, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::geometric_distribution<int> thermal(1.0 / (1.0 + noise.com_nbar));
  TrialNoise t;
  const double z = normal(rng);
  const double u = uniform(rng);
  const int n_com = thermal(rng);
  t.rabi_multiplier = std::max(0.0, 1.0 + noise.rabi_noise_sigma * z);
  t.initial_stretch_n = u < noise.stretch_ground_prob ? 0 : 1;
  t.com_n = n_com;
  t.com_eta = noise.com_eta;
  return t;
}

// ---------------------------------------------------------------------------
// Pulse unitaries. Rotation convention: exp(-i Omega t (cos p sx + sin p sy)),
// so Omega t = pi/2 flips the spin and Omega t = pi is a 2pi pulse.

template <typename Real = double>
Eigen::Matrix<std::complex<Real>, 2, 2> single_spin_rotation(Real Omega, Real t, Real phase) {
  using C = std::complex<Real>;
  const Real c = std::cos(Omega * t);
  const Real s = std::sin(Omega * t);
  Eigen::Matrix<C, 2, 2> u;
  u << C(c), C(0, -s) * std::polar(Real(1), -phase), C(0, -s) * std::polar(Real(1), phase), C(c);
  return u;
}

/// Independent rotations of the two spins as a 4x4 operator.
template <typename Real = double>
SpinMatrix<Real> carrier_spin_unitary(Real Omega_1, Real Omega_2, Real t, Real phase = 0) {
  if (!(t >= 0)) throw std::invalid_argument("carrier_unitary: t must be >= 0");
  const auto u1 = single_spin_rotation(Omega_1, t, phase);
  const auto u2 = single_spin_rotation(Omega_2, t, phase);
  SpinMatrix<Real> u;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) u(2 * a + b, 2 * c + d) = u1(a, c) * u2(b, d);
  return u;
}

/// Carrier pulse on the full truncated space (spin operator (x) identity).
template <typename Real = double>
Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic> carrier_unitary(
    Real Omega_1, Real Omega_2, Real t, Real phase, int fock_levels) {
  const SpinMatrix<Real> s = carrier_spin_unitary(Omega_1, Omega_2, t, phase);
  const int n = fock_levels;
  Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic> u =
      Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>::Zero(4 * n, 4 * n);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      u.block(a * n, b * n, n, n).diagonal().setConstant(s(a, b));
  return u;
}

template <typename Real>
JointState<Real> apply_spin_operator(const SpinMatrix<Real>& op, const JointState<Real>& s) {
  using Vector = typename JointState<Real>::Vector;
  Vector out(s.dimension());
  Eigen::Map<Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 4>>(out.data(), s.fock_levels(), 4) =
      s.as_matrix() * op.transpose();
  return JointState<Real>::from_amplitudes(std::move(out), s.fock_levels());
}

template <typename Real>
JointState<Real> apply_operator(
    const Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>& op,
    const JointState<Real>& s) {
  if (op.rows() != s.dimension() || op.cols() != s.dimension())
    throw std::invalid_argument("apply_operator: dimension mismatch");
  return JointState<Real>::from_amplitudes(op * s.amplitudes(), s.fock_levels());
}

/// Red-sideband coupling |d>_i|n> <-> |u>_i|n-1> with strength
/// sqrt(n) * coupling_i * e^{i phase_i} on the truncated space.
template <typename Real = double>
Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic> rsb_hamiltonian(
    Real coupling_1, Real coupling_2, Real phase_1, Real phase_2, int fock_levels) {
  using C = std::complex<Real>;
  using M = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
  const int n_max = fock_levels;
  M h = M::Zero(4 * n_max, 4 * n_max);
  const Real coupling[2] = {coupling_1, coupling_2};
  const Real phase[2] = {phase_1, phase_2};
  for (TwoSpin s : kTwoSpinBasis) {
    for (int ion = 0; ion < 2; ++ion) {
      if (spin_of(s, ion) != Spin::Down) continue;
      const TwoSpin flipped = ion == 0 ? two_spin(Spin::Up, spin_of(s, 1))
                                       : two_spin(spin_of(s, 0), Spin::Up);
      for (int n = 1; n < n_max; ++n) {
        const int from = JointState<Real>::index({s, n}, n_max);
        const int to = JointState<Real>::index({flipped, n - 1}, n_max);
        const C g = std::sqrt(Real(n)) * coupling[ion] * std::polar(Real(1), phase[ion]);
        h(to, from) += g;
        h(from, to) += std::conj(g);
      }
    }
  }
  return h;
}

/// exp(-i H t) for the red-sideband coupling with eta' * Omega_i per ion and
/// relative phase phi on ion 1.
template <typename Real = double>
Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic> rsb_unitary(
    const AddressingProfile& profile, Real eta_prime, Real phi, Real t,
    int fock_levels = kDefaultFockLevels, Real drive_phase = 0) {
  using C = std::complex<Real>;
  using M = Eigen::Matrix<C, Eigen::Dynamic, Eigen::Dynamic>;
  if (!(t >= 0)) throw std::invalid_argument("rsb_unitary: t must be >= 0");
  const M h = rsb_hamiltonian<Real>(eta_prime * Real(profile.Omega_1),
                                    eta_prime * Real(profile.Omega_2), drive_phase + phi,
                                    drive_phase, fock_levels);
  Eigen::SelfAdjointEigenSolver<M> es(h);
  const Eigen::Matrix<C, Eigen::Dynamic, 1> phases =
      (es.eigenvalues().template cast<C>() * C(0, -t)).array().exp();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

/// Norm of the amplitude in ladders the truncation cuts: |spins, n> with
/// n + (number of up spins) >= N_max. The red sideband conserves that sum, so
/// these components are the only ones a truncated propagator gets wrong.
template <typename Real>
Real truncation_leakage(const JointState<Real>& s) {
  Real sum = 0;
  for (TwoSpin spins : kTwoSpinBasis)
    for (int n = 0; n < s.fock_levels(); ++n)
      if (n + up_count(spins) >= s.fock_levels()) sum += std::norm(s.amplitude({spins, n}));
  return std::sqrt(sum);
}

inline constexpr double kLeakageTolerance = 1e-8;

/// Moves every |spins, n> to |spins, n + shift>.
template <typename Real>
JointState<Real> raise_stretch(const JointState<Real>& s, int shift) {
  if (shift == 0) return s;
  const int n_max = s.fock_levels();
  typename JointState<Real>::Vector v = JointState<Real>::Vector::Zero(s.dimension());
  for (TwoSpin spins : kTwoSpinBasis) {
    for (int n = 0; n < n_max; ++n) {
      const auto a = s.amplitude({spins, n});
      if (n + shift < n_max) {
        v(JointState<Real>::index({spins, n + shift}, n_max)) = a;
      } else if (std::abs(a) > kLeakageTolerance) {
        throw TruncationError("raise_stretch: occupied Fock level pushed past N_max");
      }
    }
  }
  return JointState<Real>::from_amplitudes(std::move(v), n_max);
}

template <typename Real>
JointState<Real> apply_pulse(const JointState<Real>& s, const PulseSpec& pulse,
                             const TrialNoise& trial) {
  pulse.validate();
  const Real t = Real(pulse.duration);
  const Real phase = Real(pulse.drive_phase);
  const AddressingProfile& a = pulse.addressing;
  switch (pulse.kind) {
    case PulseKind::XCarrier: {
      const Real f = Real(trial.x_beam_factor());
      return apply_spin_operator(
          carrier_spin_unitary<Real>(f * Real(a.Omega_1), f * Real(a.Omega_2), t, phase), s);
    }
    case PulseKind::CoCarrier: {
      const Real omega = Real(trial.co_beam_factor()) * Real(a.Omega_c);
      return apply_spin_operator(carrier_spin_unitary<Real>(omega, omega, t, phase), s);
    }
    case PulseKind::RedSideband: {
      const Real leak = truncation_leakage(s);
      if (leak > Real(kLeakageTolerance))
        throw TruncationError("rsb pulse: amplitude " + std::to_string(static_cast<double>(leak)) +
                              " on ladders cut by the Fock truncation");
      const AddressingProfile drive = scaled(a, trial.x_beam_factor());
      return apply_operator(rsb_unitary<Real>(drive, Real(pulse.eta_prime),
                                              Real(pulse.entangle_phase_phi), t, s.fock_levels(),
                                              phase),
                            s);
    }
  }
  throw std::logic_error("apply_pulse: unknown pulse kind");
}

/// Applies the pulses in order under one fixed draw of the noise ledger.
template <typename Real>
JointState<Real> apply_sequence(const JointState<Real>& initial, std::span<const PulseSpec> pulses,
                                const TrialNoise& trial) {
  JointState<Real> s = raise_stretch(initial, trial.initial_stretch_n);
  for (const PulseSpec& p : pulses) s = apply_pulse(s, p, trial);
  return s;
}

template <typename Real>
JointState<Real> apply_sequence(const JointState<Real>& initial, std::span<const PulseSpec> pulses,
                                const NoiseModel& noise, std::uint64_t trial_seed) {
  noise.validate();
  Rng rng(trial_seed);
  return apply_sequence(initial, pulses, sample_trial_noise(noise, rng));
}

// ---------------------------------------------------------------------------
// Fluorescence.

template <typename Real>
Real fluorescence_expectation(const Populations<Real>& p, Real alpha) {
  if (!(std::abs(alpha) <= Real(0.2)))
    throw std::invalid_argument("fluorescence_expectation: |alpha| must be <= 0.2");
  return 2 * p(index_of(TwoSpin::DownDown)) + (1 + alpha) * p(index_of(TwoSpin::DownUp)) +
         (1 - alpha) * p(index_of(TwoSpin::UpDown));
}

template <typename Real>
Real fluorescence_expectation(const JointState<Real>& s, Real alpha) {
  return fluorescence_expectation<Real>(spin_populations(s), alpha);
}

template <typename Real>
Real fluorescence_expectation(const DensityOperator<Real>& rho, Real alpha) {
  return fluorescence_expectation<Real>(rho.populations(), alpha);
}

/// Closed-form x-carrier signal from |dd> with a decay envelope.
inline double signal_model(double t, double Omega_1, double Omega_2, double gamma, double alpha) {
  if (!(Omega_1 >= Omega_2 && Omega_2 > 0.0))
    throw std::invalid_argument("signal_model: requires Omega_1 >= Omega_2 > 0");
  return 1.0 + 0.5 * (1.0 + alpha) * std::cos(2.0 * Omega_1 * t) * std::exp(-gamma * t) +
         0.5 * (1.0 - alpha) * std::cos(2.0 * Omega_2 * t) *
             std::exp(-(Omega_2 / Omega_1) * gamma * t);
}

}  // namespace ionent
