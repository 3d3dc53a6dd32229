#pragma once

#include "ionent/detection.hpp"
#include "ionent/dynamics.hpp"
#include "ionent/fitting.hpp"
#include "ionent/hilbert.hpp"
#include "ionent/trap.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ionent {

struct ScanPoint {
  double abscissa = 0.0;  // s for time scans, rad for rotation scans
  double p_mixed = 0.0;   // P_du + P_ud
  double p_pure = 0.0;    // P_dd + P_uu
  Populations<double> populations = Populations<double>::Zero();
  std::uint64_t trials = 0;
  double signal = 0.0;  // fluorescence expectation (time scans)
  double signal_stderr = 0.0;
};

struct ScanResult {
  std::vector<ScanPoint> points;
  std::map<std::string, FitParameter> fit;
  std::uint64_t seed = 0;

  /// Throws std::out_of_range for an unknown parameter name.
  const FitParameter& param(const std::string& name) const { return fit.at(name); }
};

std::vector<double> linspace(double first, double last, std::size_t count);

/// Pulse program taking |dd, 0> to the labelled basis state. dd needs
/// nothing, du uses the 2pi:pi x-carrier pulse (requires Omega_1 = 2 Omega_2),
/// uu the co-propagating pi:pi pulse, ud both.
std::vector<PulseSpec> prepare_basis(TwoSpin label, const AddressingProfile& profile);

/// Monte-Carlo fluorescence signal from |dd, 0> driven on the x-carrier,
/// followed by a fit of the decaying two-frequency model. Fit keys:
/// omega_1, omega_2, gamma, alpha, chi2_reduced.
ScanResult rabi_scan(const AddressingProfile& profile, const NoiseModel& noise,
                     const std::vector<double>& t_grid, std::uint64_t trials_per_point,
                     std::uint64_t seed);

/// Preparation of |du> (with prep_profile, defaulting to `profile`) followed
/// by a red-sideband pulse of duration pi / G, G = eta' sqrt(Omega_1^2 + Omega_2^2).
std::vector<PulseSpec> entangle_program(double phi, const AddressingProfile& profile,
                                        double eta_prime,
                                        const std::optional<AddressingProfile>& prep_profile = {});

/// One trial of the entangling sequence.
JointState<double> entangle(double phi, const AddressingProfile& profile, double eta_prime,
                            const NoiseModel& noise, std::uint64_t seed,
                            const std::optional<AddressingProfile>& prep_profile = {});

/// Spin density operator averaged over `trials` independent noisy trials.
DensityOperator<double> entangle_ensemble(double phi, const AddressingProfile& profile,
                                          double eta_prime, const NoiseModel& noise,
                                          std::uint64_t trials, std::uint64_t seed,
                                          const std::optional<AddressingProfile>& prep_profile = {});

/// Equal rotation of both spins by theta on the co-propagating carrier.
DensityOperator<double> rotate_both(const DensityOperator<double>& rho, double theta);

/// For each theta: rotate, detect (or read populations directly when
/// `detection` is empty), estimate populations. Fit keys: offset, amplitude,
/// phase, cos_amplitude, contrast (= 2|amplitude|) and coherence
/// (= 2|Re rho_du,ud| recovered from offset and cos_amplitude).
ScanResult rotation_scan(const DensityOperator<double>& input, const std::vector<double>& theta_grid,
                         std::uint64_t trials_per_point,
                         const std::optional<DetectionModel>& detection, std::uint64_t seed);

struct FidelityReport {
  double fidelity = 0.0;
  // <B|rho|B> of the synthesized operator, when the inputs admit one.
  std::optional<double> synthesized_fidelity;
};

FidelityReport fidelity_report(const Populations<double>& populations, double contrast,
                               BellSign sign);

struct GammaCalibration {
  std::vector<double> t_grid = linspace(0.0, 10e-6, 101);
  std::uint64_t trials_per_point = 1000;
  std::uint64_t seed = 1;
  double relative_tolerance = 0.02;
};

/// Finds rabi_noise_sigma such that the fitted decay rate of rabi_scan
/// matches target_gamma. Throws std::domain_error when unattainable.
NoiseModel calibrate_gamma(const NoiseModel& noise, const AddressingProfile& profile,
                           double target_gamma, const GammaCalibration& options = {});

}  // namespace ionent
