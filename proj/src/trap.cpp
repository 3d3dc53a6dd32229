#include "ionent/trap.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ionent {

void TrapConfig::validate() const {
  if (!(omega_x > 0.0)) throw std::invalid_argument("trap: omega_x must be positive");
  if (!(eta_single > 0.0 && eta_single < 1.0))
    throw std::invalid_argument("trap: eta_single must lie in (0, 1)");
  if (!(ion_spacing_l > 0.0)) throw std::invalid_argument("trap: ion spacing must be positive");
  if (!(delta_k_mag > 0.0)) throw std::invalid_argument("trap: |delta k| must be positive");
  if (U0_phase_zero == U0_phase_pi)
    throw std::invalid_argument("trap: phase calibration voltages must differ");
}

void AddressingProfile::validate() const {
  if (harmonic_order != 0 && harmonic_order != 1)
    throw std::invalid_argument("addressing: harmonic_order must be 0 or 1");
  if (Omega_1 < 0.0 || Omega_2 < 0.0 || Omega_c < 0.0)
    throw std::invalid_argument("addressing: Rabi frequencies must be non-negative");
  if (xi_1 < 0.0 || xi_2 < 0.0)
    throw std::invalid_argument("addressing: micro-motion amplitudes must be non-negative");
  // Small slack for profiles produced by scaling.
  if (harmonic_order == 0 && (Omega_1 > Omega_c * (1 + 1e-12) || Omega_2 > Omega_c * (1 + 1e-12)))
    throw std::invalid_argument("addressing: carrier Rabi frequency exceeds Omega_c");
}

AddressingProfile make_profile(double Omega_1, double Omega_2, double Omega_c) {
  AddressingProfile p;
  p.Omega_1 = Omega_1;
  p.Omega_2 = Omega_2;
  p.Omega_c = Omega_c;
  p.validate();
  return p;
}

AddressingProfile scaled(const AddressingProfile& profile, double factor) {
  if (!(factor >= 0.0)) throw std::invalid_argument("addressing: scale factor must be >= 0");
  AddressingProfile p = profile;
  p.Omega_1 *= factor;
  p.Omega_2 *= factor;
  p.Omega_c *= factor;
  return p;
}

double stretch_frequency(double omega_x) {
  if (!(omega_x > 0.0)) throw std::invalid_argument("stretch_frequency: omega_x must be positive");
  return std::sqrt(3.0) * omega_x;
}

double lamb_dicke_two_ion(double eta_single) {
  if (!(eta_single > 0.0 && eta_single < 1.0))
    throw std::invalid_argument("lamb_dicke_two_ion: eta must lie in (0, 1)");
  return eta_single / std::sqrt(2.0 * std::sqrt(3.0));
}

double micromotion_rabi(double Omega_c, double delta_k_mag, double xi, int harmonic_order) {
  if (!(Omega_c > 0.0)) throw std::invalid_argument("micromotion_rabi: Omega_c must be positive");
  if (!(xi >= 0.0)) throw std::invalid_argument("micromotion_rabi: xi must be non-negative");
  if (harmonic_order != 0 && harmonic_order != 1)
    throw std::invalid_argument("micromotion_rabi: harmonic_order must be 0 or 1");
  const double arg = delta_k_mag * xi;
  return Omega_c * std::abs(std::cyl_bessel_j(static_cast<double>(harmonic_order), arg));
}

AddressingProfile addressing_profile(const TrapConfig& cfg, double d, double Omega_c,
                                     int harmonic_order) {
  cfg.validate();
  const double half = 0.5 * cfg.ion_spacing_l;
  AddressingProfile p;
  p.xi_1 = std::abs(d - half);
  p.xi_2 = std::abs(d + half);
  p.harmonic_order = harmonic_order;
  p.Omega_c = Omega_c;
  for (double xi : {p.xi_1, p.xi_2}) {
    if (!(cfg.delta_k_mag * xi < kJ0SecondZero)) {
      throw std::domain_error("addressing_profile: displacement " + std::to_string(d) +
                              " m leaves the Bessel guard window");
    }
  }
  p.Omega_1 = micromotion_rabi(Omega_c, cfg.delta_k_mag, p.xi_1, harmonic_order);
  p.Omega_2 = micromotion_rabi(Omega_c, cfg.delta_k_mag, p.xi_2, harmonic_order);
  return p;
}

double solve_displacement_for_ratio(const TrapConfig& cfg, double target_ratio) {
  cfg.validate();
  if (!(target_ratio >= 1.0))
    throw std::domain_error("solve_displacement_for_ratio: ratio must be >= 1");

  const double half = 0.5 * cfg.ion_spacing_l;
  // Ion 2 is always the farther one for d >= 0, so it sets the window edge.
  const double d_max = kJ0SecondZero / cfg.delta_k_mag - half;
  if (!(d_max > 0.0))
    throw std::domain_error("solve_displacement_for_ratio: ions do not fit in the guard window");

  auto mismatch = [&](double d) {
    const double o1 = std::abs(std::cyl_bessel_j(0.0, cfg.delta_k_mag * std::abs(d - half)));
    const double o2 = std::abs(std::cyl_bessel_j(0.0, cfg.delta_k_mag * (d + half)));
    return o1 - target_ratio * o2;
  };

  double lo = 0.0;
  double f_lo = mismatch(lo);
  if (std::abs(f_lo) <= 1e-15) return 0.0;

  constexpr int kScanSteps = 20000;
  const double step = d_max * (1.0 - 1e-12) / kScanSteps;
  for (int i = 1; i <= kScanSteps; ++i) {
    const double hi = i * step;
    const double f_hi = mismatch(hi);
    if ((f_lo < 0.0) != (f_hi < 0.0) || f_hi == 0.0) {
      double a = lo, b = hi, fa = f_lo;
      for (int it = 0; it < 200 && b - a > 0.0; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) break;
        const double fm = mismatch(mid);
        if ((fa < 0.0) == (fm < 0.0)) {
          a = mid;
          fa = fm;
        } else {
          b = mid;
        }
      }
      return std::abs(fa) < std::abs(mismatch(b)) ? a : b;
    }
    lo = hi;
    f_lo = f_hi;
  }
  throw std::domain_error("solve_displacement_for_ratio: ratio " + std::to_string(target_ratio) +
                          " not reachable inside the guard window");
}

double phase_from_static_potential(const TrapConfig& cfg, double U0) {
  if (cfg.U0_phase_zero == cfg.U0_phase_pi)
    throw std::invalid_argument("phase_from_static_potential: degenerate calibration");
  return std::numbers::pi * (cfg.U0_phase_zero - U0) / (cfg.U0_phase_zero - cfg.U0_phase_pi);
}

}  // namespace ionent
