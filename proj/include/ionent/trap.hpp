#pragma once

#include <numbers>

namespace ionent {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kJ0FirstZero = 2.404825557695773;
inline constexpr double kJ0SecondZero = 5.520078110286311;

// Trap geometry and calibration. Angular frequencies in rad/s, lengths in m.
//
// delta_k_mag is the effective Bessel-argument scale: the micro-motion
// amplitude of an ion is taken proportional to its displacement from the rf
// null, and that proportionality constant is folded into delta_k_mag so that
// |delta_k| * xi is directly the argument of J_k. The default places the
// second ion on the first J0 zero when the first ion sits on the rf null.
struct TrapConfig {
  double omega_x = kTwoPi * 8.0e6;
  double omega_y = kTwoPi * 16.8e6;  // recorded only
  double omega_z = kTwoPi * 10.8e6;  // recorded only
  double eta_single = 0.23;
  double ion_spacing_l = 2.0e-6;
  double delta_k_mag = kJ0FirstZero / 2.0e-6;
  double U0_volts = 16.3;
  double U0_phase_zero = 16.3;
  double U0_phase_pi = 12.6;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

// Per-ion drive strengths. harmonic_order 0 is the ordinary x-carrier (J0),
// 1 the first rf micro-motion sideband (J1).
struct AddressingProfile {
  double xi_1 = 0.0;
  double xi_2 = 0.0;
  double Omega_1 = 0.0;
  double Omega_2 = 0.0;
  double Omega_c = 0.0;
  int harmonic_order = 0;

  double ratio() const { return Omega_1 / Omega_2; }
  void validate() const;
};

/// Profile with the given Rabi frequencies and no geometry attached.
AddressingProfile make_profile(double Omega_1, double Omega_2, double Omega_c);

/// Same profile with every Rabi frequency multiplied by `factor`.
AddressingProfile scaled(const AddressingProfile& profile, double factor);

double stretch_frequency(double omega_x);

/// Stretch-mode Lamb-Dicke parameter of a two-ion crystal.
double lamb_dicke_two_ion(double eta_single);

/// Omega_c * |J_k(delta_k * xi)|. The sign of J_k is a pi phase on that ion's
/// drive and is dropped here.
double micromotion_rabi(double Omega_c, double delta_k_mag, double xi, int harmonic_order);

/// Rabi frequencies of both ions for a centre-of-mass displacement d from the
/// rf null. Positive d moves ion 1 toward the null and ion 2 away from it.
/// Throws std::domain_error if either Bessel argument leaves the window below
/// the second J0 zero.
AddressingProfile addressing_profile(const TrapConfig& cfg, double com_displacement_d,
                                     double Omega_c, int harmonic_order = 0);

/// Smallest d >= 0 at which Omega_1 / Omega_2 equals target_ratio on the
/// x-carrier. Throws std::domain_error when the ratio is not reachable inside
/// the guard window.
double solve_displacement_for_ratio(const TrapConfig& cfg, double target_ratio);

/// Affine calibration through (U0_phase_zero, 0) and (U0_phase_pi, pi).
double phase_from_static_potential(const TrapConfig& cfg, double U0);

}  // namespace ionent
