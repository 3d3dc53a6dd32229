#include "ionent/dynamics.hpp"
#include "ionent/errors.hpp"
#include "ionent/fitting.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace ionent;

TEST(Fitting, RabiFitRecoversExactModel) {
  const double w1 = kTwoPi * 225e3, w2 = kTwoPi * 112.5e3, g = kTwoPi * 6e3, a = -0.05;
  std::vector<double> t, s;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(i * 1e-7);
    s.push_back(signal_model(t.back(), w1, w2, g, a));
  }
  const RabiFit fit = fit_rabi_signal(t, s);
  EXPECT_NEAR(fit.omega_1.value / w1, 1.0, 1e-6);
  EXPECT_NEAR(fit.omega_2.value / w2, 1.0, 1e-6);
  EXPECT_NEAR(fit.gamma.value / g, 1.0, 1e-4);
  EXPECT_NEAR(fit.alpha.value, a, 1e-6);
}

TEST(Fitting, RabiFitToleratesNoise) {
  const double w1 = kTwoPi * 180e3, w2 = kTwoPi * 70e3, g = kTwoPi * 4e3, a = 0.03;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> t, s, sigma;
  for (int i = 0; i <= 120; ++i) {
    t.push_back(i * 1e-7);
    s.push_back(signal_model(t.back(), w1, w2, g, a) + noise(rng));
    sigma.push_back(0.01);
  }
  const RabiFit fit = fit_rabi_signal(t, s, sigma);
  EXPECT_NEAR(fit.omega_1.value / w1, 1.0, 0.01);
  EXPECT_NEAR(fit.omega_2.value / w2, 1.0, 0.01);
  EXPECT_NEAR(fit.alpha.value, a, 0.01);
  EXPECT_GT(fit.omega_1.uncertainty, 0.0);
  EXPECT_LT(fit.chi2_reduced, 2.0);
}

TEST(Fitting, RabiFitNeedsData) {
  std::vector<double> t{0, 1, 2}, s{2, 1, 0};
  EXPECT_THROW(fit_rabi_signal(t, s), FitError);
  std::vector<double> flat_t(10, 0.0), flat_s(10, 1.0);
  EXPECT_THROW(fit_rabi_signal(flat_t, flat_s), FitError);
}

TEST(Fitting, SinusoidExact) {
  std::vector<double> th, y;
  for (int i = 0; i < 20; ++i) {
    th.push_back(i * 0.15);
    y.push_back(0.7 + 0.3 * std::cos(2 * th.back() + 0.4));
  }
  const SinusoidFit f = fit_double_angle_sinusoid(th, y);
  EXPECT_NEAR(f.offset.value, 0.7, 1e-12);
  EXPECT_NEAR(f.amplitude.value, 0.3, 1e-12);
  EXPECT_NEAR(f.phase.value, 0.4, 1e-12);
  EXPECT_NEAR(f.cos_amplitude.value, 0.3 * std::cos(0.4), 1e-12);
  EXPECT_NEAR(f.rms_residual, 0.0, 1e-12);
}

TEST(Fitting, SinusoidNeedsThreeAngles) {
  // theta and theta + pi are the same point of a double-angle sinusoid.
  std::vector<double> th{0.0, std::numbers::pi, 0.5, 0.5 + std::numbers::pi}, y{1, 1, 0.5, 0.5};
  EXPECT_THROW(fit_double_angle_sinusoid(th, y), FitError);
}
