#pragma once

#include "ionent/detection.hpp"
#include "ionent/dynamics.hpp"
#include "ionent/hilbert.hpp"
#include "ionent/trap.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ionent {

enum class Experiment { Rabi, Entangle, Rotate, Histograms, Estimate, Classify, Fidelity };

const char* experiment_name(Experiment e);

// Either a target ratio (solved on the x-carrier) or an explicit displacement,
// and either the ion-1 Rabi frequency or the bare carrier Omega_c.
struct AddressingSpec {
  std::optional<double> ratio = 2.0;
  std::optional<double> displacement;  // m
  std::optional<double> rabi_1 = kTwoPi * 225.0e3;  // rad/s
  std::optional<double> omega_c;       // rad/s
  int harmonic_order = 0;
  // Entangling pulse at a different ratio; preparation keeps `ratio`.
  std::optional<double> rsb_ratio;
};

struct NoiseSpec {
  bool enabled = true;
  NoiseModel model;
  double gamma_target = kTwoPi * 6.0e3;       // rad/s
  std::optional<double> rabi_noise_sigma;     // skips calibration when set
  std::uint64_t calibration_trials = 1000;
};

struct DetectionSpec {
  bool enabled = true;
  DetectionModel model;
  std::optional<double> target_tail = 0.10;  // calibrates depumping when set
};

struct RabiSpec {
  double t_max = 10e-6;
  std::size_t points = 101;
  std::uint64_t trials = 1000;
};

struct EntangleSpec {
  std::optional<double> phi;
  std::optional<double> u0_volts;
  std::uint64_t trials = 1000;
  std::vector<PulseSpec> sequence;  // empty: standard program
};

enum class RotateSource { Synthesized, Entangle, Singlet, Triplet };

struct RotateSpec {
  RotateSource source = RotateSource::Synthesized;
  double contrast = 0.6;
  BellSign sign = BellSign::Minus;
  Populations<double> populations = Populations<double>(0.15, 0.4, 0.4, 0.05);
  std::size_t theta_points = 25;
  double theta_max = std::numbers::pi;
  std::uint64_t trials = 10000;
};

struct HistogramSpec {
  std::uint64_t trials = 10000;
  CasePriors priors = kUniformPriors;
};

struct EstimateSpec {
  std::string observed;    // histogram path
  std::string references;  // prefix of PREFIX_ref_{dd,du,ud,uu}.hist
};

struct ClassifySpec {
  CaseThresholds thresholds;
  std::vector<int> counts;
  std::string histogram;
};

struct RunConfig {
  Experiment experiment = Experiment::Rabi;
  std::optional<std::uint64_t> seed;
  std::string output = "ionent";
  TrapConfig trap;
  AddressingSpec addressing;
  NoiseSpec noise;
  DetectionSpec detection;
  RabiSpec rabi;
  EntangleSpec entangle;
  RotateSpec rotate;
  HistogramSpec histograms;
  EstimateSpec estimate;
  ClassifySpec classify;
  std::string canonical;  // normalized JSON text of the input file

  /// Whether this experiment draws random numbers.
  bool stochastic() const;
};

// Command-line values; they replace the file's entries before validation and
// so enter the configuration hash.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::uint64_t> trials;
};

/// Parses the JSON configuration. Unknown keys, wrong types and violated
/// invariants throw ConfigError.
RunConfig parse_config(const std::string& text, Experiment experiment,
                       const ConfigOverrides& overrides = {});
RunConfig load_config(const std::string& path, Experiment experiment,
                      const ConfigOverrides& overrides = {});

/// FNV-1a 64 over the canonical configuration, experiment name and seed.
std::uint64_t config_hash(const RunConfig& cfg);
std::string hex64(std::uint64_t v);

/// Addressing profile implied by trap and addressing sections.
AddressingProfile resolve_profile(const RunConfig& cfg);
/// Profile for the entangling pulse (rsb_ratio when set).
AddressingProfile resolve_rsb_profile(const RunConfig& cfg);
double resolve_phi(const RunConfig& cfg);

}  // namespace ionent
