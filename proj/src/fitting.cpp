#include "ionent/fitting.hpp"

#include "ionent/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

namespace ionent {

namespace {

using Vector4 = Eigen::Vector4d;

struct RabiModel {
  // Parameters: Omega_1, Omega_2, gamma, alpha.
  static double value(double t, const Vector4& p) {
    const double e1 = std::exp(-p(2) * t);
    const double e2 = std::exp(-(p(1) / p(0)) * p(2) * t);
    return 1.0 + 0.5 * (1.0 + p(3)) * std::cos(2.0 * p(0) * t) * e1 +
           0.5 * (1.0 - p(3)) * std::cos(2.0 * p(1) * t) * e2;
  }

  static Eigen::RowVector4d gradient(double t, const Vector4& p) {
    const double w1 = p(0), w2 = p(1), g = p(2), a = p(3);
    const double e1 = std::exp(-g * t);
    const double e2 = std::exp(-(w2 / w1) * g * t);
    const double c1 = std::cos(2.0 * w1 * t), s1 = std::sin(2.0 * w1 * t);
    const double c2 = std::cos(2.0 * w2 * t), s2 = std::sin(2.0 * w2 * t);
    const double h1 = 0.5 * (1.0 + a), h2 = 0.5 * (1.0 - a);
    Eigen::RowVector4d d;
    d(0) = -2.0 * t * h1 * s1 * e1 + h2 * c2 * e2 * (w2 * g * t / (w1 * w1));
    d(1) = -2.0 * t * h2 * s2 * e2 - h2 * c2 * e2 * (g * t / w1);
    d(2) = -t * h1 * c1 * e1 - (w2 / w1) * t * h2 * c2 * e2;
    d(3) = 0.5 * c1 * e1 - 0.5 * c2 * e2;
    return d;
  }
};

Eigen::VectorXd fit_weights(std::span<const double> sigma, std::size_t n) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  if (sigma.empty()) return w;
  if (sigma.size() != n) throw FitError("fit: sigma has the wrong length");
  std::vector<double> positive;
  for (double s : sigma)
    if (s > 0.0) positive.push_back(s);
  if (positive.empty()) return w;
  std::nth_element(positive.begin(), positive.begin() + positive.size() / 2, positive.end());
  // Points with (near) zero spread, e.g. t = 0, would otherwise dominate.
  const double floor = 0.1 * positive[positive.size() / 2];
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::max(sigma[i], floor);
    w(static_cast<Eigen::Index>(i)) = 1.0 / (s * s);
  }
  return w;
}

Vector4 grid_start(std::span<const double> t, std::span<const double> y, const Eigen::VectorXd& w) {
  const std::size_t n = t.size();
  double t_span = 0.0, dt_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    t_span = std::max(t_span, t[i]);
    if (i > 0 && t[i] > t[i - 1]) dt_min = std::min(dt_min, t[i] - t[i - 1]);
  }
  if (!(t_span > 0.0) || !std::isfinite(dt_min)) throw FitError("fit: time grid has no extent");

  const double step = 0.25 / t_span;
  const double omega_max = std::numbers::pi / (2.0 * dt_min);
  const int count = std::max(2, static_cast<int>(omega_max / step));
  Eigen::MatrixXd cosines(count, static_cast<Eigen::Index>(n));
  for (int k = 0; k < count; ++k)
    for (std::size_t i = 0; i < n; ++i)
      cosines(k, static_cast<Eigen::Index>(i)) = std::cos(2.0 * (k + 1) * step * t[i]);

  Eigen::VectorXd base(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) base(static_cast<Eigen::Index>(i)) = y[i] - 1.0;

  double best_chi2 = std::numeric_limits<double>::infinity();
  Vector4 best(step, step, 0.0, 0.0);
  for (int a = 1; a < count; ++a) {
    for (int b = 0; b < a; ++b) {
      const Eigen::VectorXd d = base - 0.5 * (cosines.row(a) + cosines.row(b)).transpose();
      const Eigen::VectorXd u = 0.5 * (cosines.row(a) - cosines.row(b)).transpose();
      const double uu = (w.array() * u.array() * u.array()).sum();
      const double du = (w.array() * d.array() * u.array()).sum();
      const double alpha = uu > 0.0 ? std::clamp(du / uu, -0.2, 0.2) : 0.0;
      const double chi2 = (w.array() * (d - alpha * u).array().square()).sum();
      if (chi2 < best_chi2) {
        best_chi2 = chi2;
        best = Vector4((a + 1) * step, (b + 1) * step, 0.0, alpha);
      }
    }
  }
  return best;
}

}  // namespace

RabiFit fit_rabi_signal(std::span<const double> t, std::span<const double> signal,
                        std::span<const double> sigma) {
  const std::size_t n = t.size();
  if (signal.size() != n) throw FitError("fit_rabi_signal: t and signal differ in length");
  if (n < 6) throw FitError("fit_rabi_signal: need at least 6 samples");
  const Eigen::VectorXd w = fit_weights(sigma, n);

  Vector4 p = grid_start(t, signal, w);
  // Seed the decay with a rate that is small on the scan window.
  p(2) = 0.1 / *std::max_element(t.begin(), t.end());

  auto chi2_of = [&](const Vector4& q) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = signal[i] - RabiModel::value(t[i], q);
      c += w(static_cast<Eigen::Index>(i)) * r * r;
    }
    return c;
  };

  double chi2 = chi2_of(p);
  double lambda = 1e-3;
  int iter = 0;
  bool converged = false;
  Eigen::Matrix4d jtj;
  constexpr int kMaxIterations = 500;
  for (; iter < kMaxIterations; ++iter) {
    jtj.setZero();
    Vector4 jtr = Vector4::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::RowVector4d g = RabiModel::gradient(t[i], p);
      const double wi = w(static_cast<Eigen::Index>(i));
      const double r = signal[i] - RabiModel::value(t[i], p);
      jtj.noalias() += wi * g.transpose() * g;
      jtr.noalias() += wi * r * g.transpose();
    }
    bool accepted = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix4d a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
      const Vector4 step = a.ldlt().solve(jtr);
      const Vector4 trial = p + step;
      const double trial_chi2 = (trial(0) > 0.0 && trial(1) > 0.0) ? chi2_of(trial)
                                                                   : std::numeric_limits<double>::infinity();
      if (trial_chi2 <= chi2) {
        const bool small_step =
            (step.array().abs() <= 1e-10 * (p.array().abs() + 1e-10)).all();
        const bool small_change = chi2 - trial_chi2 <= 1e-12 * std::max(chi2, 1e-300);
        p = trial;
        chi2 = trial_chi2;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (small_step || small_change) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No downhill step at any damping: a stationary point.
      converged = true;
    }
    if (converged) break;
  }
  if (!converged || !p.allFinite()) {
    throw FitError("fit_rabi_signal: no convergence after " + std::to_string(iter) +
                   " iterations (chi2 = " + std::to_string(chi2) + ", Omega_1 = " +
                   std::to_string(p(0)) + ", Omega_2 = " + std::to_string(p(1)) + ")");
  }

  const double dof = std::max<double>(1.0, static_cast<double>(n) - 4.0);
  const double chi2_reduced = chi2 / dof;
  const Eigen::Matrix4d cov = jtj.inverse() * chi2_reduced;

  RabiFit fit;
  fit.omega_1 = {p(0), std::sqrt(std::max(0.0, cov(0, 0)))};
  fit.omega_2 = {p(1), std::sqrt(std::max(0.0, cov(1, 1)))};
  fit.gamma = {p(2), std::sqrt(std::max(0.0, cov(2, 2)))};
  fit.alpha = {p(3), std::sqrt(std::max(0.0, cov(3, 3)))};
  fit.chi2_reduced = chi2_reduced;
  fit.iterations = iter;
  return fit;
}

SinusoidFit fit_double_angle_sinusoid(std::span<const double> theta, std::span<const double> y) {
  const auto n = static_cast<Eigen::Index>(theta.size());
  if (static_cast<Eigen::Index>(y.size()) != n) throw FitError("sinusoid fit: length mismatch");
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(2.0 * theta[i]);
    design(i, 2) = std::sin(2.0 * theta[i]);
    rhs(i) = y[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw FitError("sinusoid fit: sample angles do not determine the sinusoid");
  const Eigen::Vector3d c = qr.solve(rhs);
  const Eigen::VectorXd resid = rhs - design * c;

  const double dof = static_cast<double>(n - 3);
  const double s2 = dof > 0 ? resid.squaredNorm() / dof : 0.0;
  const Eigen::Matrix3d cov = (design.transpose() * design).inverse() * s2;

  SinusoidFit fit;
  fit.cos_amplitude = {c(1), std::sqrt(std::max(0.0, cov(1, 1)))};
  fit.sin_amplitude = {c(2), std::sqrt(std::max(0.0, cov(2, 2)))};
  const double amp = std::hypot(c(1), c(2));
  fit.offset = {c(0), std::sqrt(std::max(0.0, cov(0, 0)))};
  // Propagate (c1, c2) -> amplitude and phase to first order.
  double amp_var = 0.0, phase_var = 0.0;
  if (amp > 0.0) {
    const Eigen::Vector2d ga(c(1) / amp, c(2) / amp);
    const Eigen::Vector2d gp(c(2) / (amp * amp), -c(1) / (amp * amp));
    const Eigen::Matrix2d sub = cov.bottomRightCorner<2, 2>();
    amp_var = ga.dot(sub * ga);
    phase_var = gp.dot(sub * gp);
  }
  fit.amplitude = {amp, std::sqrt(std::max(0.0, amp_var))};
  fit.phase = {std::atan2(-c(2), c(1)), std::sqrt(std::max(0.0, phase_var))};
  fit.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(n));
  return fit;
}

}  // namespace ionent
