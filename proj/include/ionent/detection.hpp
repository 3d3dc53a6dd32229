#pragma once

#include "ionent/hilbert.hpp"
#include "ionent/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ionent {

// Effective fluorescence-detection model for one detection window.
struct DetectionModel {
  double tau_d = 500e-6;               // s
  double bright_rate_per_ion = 12.5;   // mean detected photons per bright ion per window
  double background_rate = 300.0;      // photons / s
  double depump_time_constant = 7e-3;  // s, shelving already included
  double dark_leak_prob = 0.02;        // per bright ion per window
  double intensity_sigma = 0.35;       // relative, shared by both ions
  double alpha = -0.05;                // ion 1 scatters (1 + alpha), ion 2 (1 - alpha)

  void validate() const;
  double background_mean() const { return background_rate * tau_d; }
};

inline constexpr int kHistogramCap = 60;

/// Photon-count histogram over m = 0..cap; counts above the cap land in the
/// top bin.
struct Histogram {
  std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(kHistogramCap + 1, 0);
  std::uint64_t trials_N = 0;

  int cap() const { return static_cast<int>(counts.size()) - 1; }
  void add(int m);
  void merge(const Histogram& other);
  Eigen::VectorXd probabilities() const;
  double mean() const;
};

using ReferenceSet = std::array<Histogram, 4>;  // indexed by TwoSpin

struct PopulationEstimate {
  Populations<double> weights = Populations<double>::Zero();
  double residual = 0.0;
  bool degenerate = false;  // reference matrix is rank deficient
};

struct CaseThresholds {
  int t1 = 3;
  int t2 = 17;
  void validate() const;
};

enum class DetectionCase { UpUp = 1, OneBright = 2, DownDown = 3 };

struct ThresholdResult {
  CaseThresholds thresholds;
  double accuracy = 0.0;
};

using CasePriors = std::array<double, 3>;
inline constexpr CasePriors kUniformPriors = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

int sample_photon_count(TwoSpin label, const DetectionModel& model, Rng& rng);
int sample_photon_count(TwoSpin label, const DetectionModel& model, std::uint64_t seed);

/// P(m > threshold | uu) by quadrature over the depump times and the
/// intensity multiplier.
double up_up_tail_probability(const DetectionModel& model, int threshold = 2);

/// Adjusts depump_time_constant so that P(m > 2 | uu) == target_tail.
DetectionModel calibrate_depump(const DetectionModel& model, double target_tail);

ReferenceSet build_reference_histograms(const DetectionModel& model, std::uint64_t trials_N,
                                        std::uint64_t seed);

/// Histogram of trials_N detections of a state with the given populations.
Histogram simulate_histogram(const Populations<double>& populations, const DetectionModel& model,
                             std::uint64_t trials_N, Rng& rng);

/// Least squares fit of the observed distribution by a mixture of the
/// references, constrained to the probability simplex.
PopulationEstimate estimate_populations(const Histogram& observed, const ReferenceSet& refs);
PopulationEstimate estimate_populations(const Eigen::VectorXd& observed,
                                        const std::array<Eigen::VectorXd, 4>& refs);

DetectionCase classify_case(int m, const CaseThresholds& th);

double threshold_accuracy(const ReferenceSet& refs, const CaseThresholds& th,
                          const CasePriors& priors = kUniformPriors);

ThresholdResult optimize_thresholds(const ReferenceSet& refs,
                                    const CasePriors& priors = kUniformPriors);

// Text format: "# trials=N tau_d_us=... <extra>" then "m\tcount" per bin.
void write_histogram(std::ostream& os, const Histogram& h, double tau_d,
                     const std::string& extra_header = {});
Histogram read_histogram(std::istream& is);

}  // namespace ionent
