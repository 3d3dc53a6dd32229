#pragma once

#include <span>

namespace ionent {

struct FitParameter {
  double value = 0.0;
  double uncertainty = 0.0;
};

struct RabiFit {
  FitParameter omega_1;
  FitParameter omega_2;
  FitParameter gamma;
  FitParameter alpha;
  double chi2_reduced = 0.0;
  int iterations = 0;
};

/// Weighted Levenberg-Marquardt fit of the decaying two-frequency carrier
/// signal. Starting values come from a grid search over (Omega_1 > Omega_2)
/// with alpha solved linearly. sigma may be empty for an unweighted fit.
/// Throws FitError when the iteration does not converge.
RabiFit fit_rabi_signal(std::span<const double> t, std::span<const double> signal,
                        std::span<const double> sigma = {});

// y = offset + amplitude * cos(2 theta + phase), written internally as
// offset + cos_amplitude * cos(2 theta) + sin_amplitude * sin(2 theta).
struct SinusoidFit {
  FitParameter offset;
  FitParameter amplitude;
  FitParameter phase;
  FitParameter cos_amplitude;
  FitParameter sin_amplitude;
  double rms_residual = 0.0;
};

/// Linear least squares; throws FitError with fewer than three independent
/// sample angles.
SinusoidFit fit_double_angle_sinusoid(std::span<const double> theta, std::span<const double> y);

}  // namespace ionent
