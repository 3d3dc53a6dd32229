#include "ionent/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace ionent {

namespace {

// Runs body(i) for i in [0, n). Each index must write only its own output
// slot; results therefore do not depend on scheduling.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

constexpr double kRatioTolerance = 1e-6;

constexpr std::uint64_t kReferenceStream = 0x7265666572656e63ULL;

}  // namespace

std::vector<double> linspace(double first, double last, std::size_t count) {
  std::vector<double> v(count);
  if (count == 1) {
    v[0] = first;
    return v;
  }
  for (std::size_t i = 0; i < count; ++i)
    v[i] = first + (last - first) * static_cast<double>(i) / static_cast<double>(count - 1);
  return v;
}

std::vector<PulseSpec> prepare_basis(TwoSpin label, const AddressingProfile& profile) {
  std::vector<PulseSpec> program;
  const bool flip_ion_2 = label == TwoSpin::DownUp || label == TwoSpin::UpDown;
  const bool swap_or_flip_both = label == TwoSpin::UpDown || label == TwoSpin::UpUp;

  if (flip_ion_2) {
    if (!(profile.Omega_2 > 0.0) ||
        std::abs(profile.Omega_1 / profile.Omega_2 - 2.0) > 2.0 * kRatioTolerance)
      throw std::domain_error("prepare_basis: the 2pi:pi pulse needs Omega_1 = 2 Omega_2");
    PulseSpec p;
    p.kind = PulseKind::XCarrier;
    p.duration = std::numbers::pi / profile.Omega_1;
    p.addressing = profile;
    program.push_back(p);
  }
  if (swap_or_flip_both) {
    if (!(profile.Omega_c > 0.0))
      throw std::domain_error("prepare_basis: co-propagating carrier needs Omega_c > 0");
    PulseSpec p;
    p.kind = PulseKind::CoCarrier;
    p.duration = 0.5 * std::numbers::pi / profile.Omega_c;
    p.addressing = profile;
    program.push_back(p);
  }
  return program;
}

ScanResult rabi_scan(const AddressingProfile& profile, const NoiseModel& noise,
                     const std::vector<double>& t_grid, std::uint64_t trials_per_point,
                     std::uint64_t seed) {
  noise.validate();
  if (!(profile.Omega_1 > profile.Omega_2))
    throw std::invalid_argument("rabi_scan: requires Omega_1 > Omega_2");
  if (trials_per_point < 1) throw std::invalid_argument("rabi_scan: need at least one trial");

  const auto start = JointState<double>::basis({TwoSpin::DownDown, 0});
  ScanResult result;
  result.seed = seed;
  result.points.resize(t_grid.size());

  parallel_for(t_grid.size(), [&](std::size_t i) {
    PulseSpec pulse;
    pulse.kind = PulseKind::XCarrier;
    pulse.duration = t_grid[i];
    pulse.addressing = profile;
    const std::span<const PulseSpec> program(&pulse, 1);

    double sum = 0.0, sum_sq = 0.0, mixed = 0.0, pure = 0.0;
    Populations<double> populations = Populations<double>::Zero();
    const std::uint64_t point_seed = seed + i;
    for (std::uint64_t trial = 0; trial < trials_per_point; ++trial) {
      Rng rng = make_rng(point_seed, trial);
      const auto state = apply_sequence(start, program, sample_trial_noise(noise, rng));
      const auto pops = spin_populations(state);
      const double s = fluorescence_expectation<double>(pops, noise.alpha);
      sum += s;
      sum_sq += s * s;
      populations += pops;
      mixed += pops(index_of(TwoSpin::DownUp)) + pops(index_of(TwoSpin::UpDown));
      pure += pops(index_of(TwoSpin::DownDown)) + pops(index_of(TwoSpin::UpUp));
    }
    const double n = static_cast<double>(trials_per_point);
    ScanPoint& pt = result.points[i];
    pt.abscissa = t_grid[i];
    pt.trials = trials_per_point;
    pt.signal = sum / n;
    const double var = n > 1 ? std::max(0.0, (sum_sq - n * pt.signal * pt.signal) / (n - 1)) : 0.0;
    pt.signal_stderr = std::sqrt(var / n);
    pt.p_mixed = mixed / n;
    pt.p_pure = pure / n;
    pt.populations = populations / n;
  });

  std::vector<double> t, s, sigma;
  for (const auto& pt : result.points) {
    t.push_back(pt.abscissa);
    s.push_back(pt.signal);
    sigma.push_back(pt.signal_stderr);
  }
  const RabiFit fit = fit_rabi_signal(t, s, sigma);
  result.fit["omega_1"] = fit.omega_1;
  result.fit["omega_2"] = fit.omega_2;
  result.fit["gamma"] = fit.gamma;
  result.fit["alpha"] = fit.alpha;
  result.fit["chi2_reduced"] = {fit.chi2_reduced, 0.0};
  return result;
}

std::vector<PulseSpec> entangle_program(double phi, const AddressingProfile& profile,
                                        double eta_prime,
                                        const std::optional<AddressingProfile>& prep_profile) {
  std::vector<PulseSpec> program = prepare_basis(TwoSpin::DownUp, prep_profile.value_or(profile));
  const double g = eta_prime * std::hypot(profile.Omega_1, profile.Omega_2);
  if (!(g > 0.0)) throw std::domain_error("entangle: red-sideband coupling vanishes");
  PulseSpec rsb;
  rsb.kind = PulseKind::RedSideband;
  rsb.duration = std::numbers::pi / g;
  rsb.addressing = profile;
  rsb.entangle_phase_phi = phi;
  rsb.eta_prime = eta_prime;
  program.push_back(rsb);
  return program;
}

JointState<double> entangle(double phi, const AddressingProfile& profile, double eta_prime,
                            const NoiseModel& noise, std::uint64_t seed,
                            const std::optional<AddressingProfile>& prep_profile) {
  const auto program = entangle_program(phi, profile, eta_prime, prep_profile);
  return apply_sequence(JointState<double>::basis({TwoSpin::DownDown, 0}),
                        std::span<const PulseSpec>(program), noise, seed);
}

DensityOperator<double> entangle_ensemble(double phi, const AddressingProfile& profile,
                                          double eta_prime, const NoiseModel& noise,
                                          std::uint64_t trials, std::uint64_t seed,
                                          const std::optional<AddressingProfile>& prep_profile) {
  if (trials < 1) throw std::invalid_argument("entangle_ensemble: need at least one trial");
  noise.validate();
  const auto program = entangle_program(phi, profile, eta_prime, prep_profile);
  const auto start = JointState<double>::basis({TwoSpin::DownDown, 0});

  // Fixed-size chunks keep the summation order independent of thread count.
  constexpr std::uint64_t kChunk = 256;
  const std::uint64_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<SpinMatrix<double>> partial(chunks, SpinMatrix<double>::Zero());
  parallel_for(chunks, [&](std::size_t c) {
    const std::uint64_t end = std::min<std::uint64_t>(trials, (c + 1) * kChunk);
    for (std::uint64_t trial = c * kChunk; trial < end; ++trial) {
      Rng rng = make_rng(seed, trial);
      const auto s = apply_sequence(start, std::span<const PulseSpec>(program),
                                    sample_trial_noise(noise, rng));
      partial[c] += reduce(s).matrix();
    }
  });
  SpinMatrix<double> sum = SpinMatrix<double>::Zero();
  for (const auto& p : partial) sum += p;
  sum /= static_cast<double>(trials);
  return DensityOperator<double>::from_matrix(0.5 * (sum + sum.adjoint()) / sum.trace().real());
}

DensityOperator<double> rotate_both(const DensityOperator<double>& rho, double theta) {
  const SpinMatrix<double> u = carrier_spin_unitary<double>(1.0, 1.0, 0.5 * theta);
  const SpinMatrix<double> out = u * rho.matrix() * u.adjoint();
  return DensityOperator<double>::from_matrix(0.5 * (out + out.adjoint()));
}

ScanResult rotation_scan(const DensityOperator<double>& input, const std::vector<double>& theta_grid,
                         std::uint64_t trials_per_point,
                         const std::optional<DetectionModel>& detection, std::uint64_t seed) {
  ScanResult result;
  result.seed = seed;
  result.points.resize(theta_grid.size());

  std::optional<ReferenceSet> refs;
  if (detection) {
    detection->validate();
    if (trials_per_point < 1) throw std::invalid_argument("rotation_scan: need at least one trial");
    refs = build_reference_histograms(*detection, trials_per_point, derive_seed(seed, kReferenceStream));
  }

  parallel_for(theta_grid.size(), [&](std::size_t i) {
    const Populations<double> exact = rotate_both(input, theta_grid[i]).populations();
    Populations<double> pops = exact;
    ScanPoint& pt = result.points[i];
    pt.abscissa = theta_grid[i];
    if (detection) {
      Rng rng = make_rng(seed + i, 0);
      const Histogram observed = simulate_histogram(exact.cwiseMax(0.0) / exact.cwiseMax(0.0).sum(),
                                                    *detection, trials_per_point, rng);
      pops = estimate_populations(observed, *refs).weights;
      pt.trials = trials_per_point;
    }
    pt.populations = pops;
    pt.p_mixed = pops(index_of(TwoSpin::DownUp)) + pops(index_of(TwoSpin::UpDown));
    pt.p_pure = pops(index_of(TwoSpin::DownDown)) + pops(index_of(TwoSpin::UpUp));
  });

  std::vector<double> theta, mixed;
  for (const auto& pt : result.points) {
    theta.push_back(pt.abscissa);
    mixed.push_back(pt.p_mixed);
  }
  const SinusoidFit fit = fit_double_angle_sinusoid(theta, mixed);
  result.fit["offset"] = fit.offset;
  result.fit["amplitude"] = fit.amplitude;
  result.fit["phase"] = fit.phase;
  result.fit["cos_amplitude"] = fit.cos_amplitude;
  result.fit["contrast"] = {2.0 * fit.amplitude.value, 2.0 * fit.amplitude.uncertainty};
  // With no dd/uu coherence, P_du + P_ud under equal rotations is
  // (2 + D)/4 - c/2 + (D/4 + c/2) cos 2theta, D = P_mixed - P_pure and
  // c = Re rho_du,ud. Offset and cosine amplitude together pin c.
  const double coherence = std::abs(1.0 + 2.0 * fit.cos_amplitude.value - 2.0 * fit.offset.value);
  const double coherence_err =
      2.0 * std::hypot(fit.cos_amplitude.uncertainty, fit.offset.uncertainty);
  result.fit["coherence"] = {coherence, coherence_err};
  result.fit["rms_residual"] = {fit.rms_residual, 0.0};
  return result;
}

FidelityReport fidelity_report(const Populations<double>& populations, double contrast,
                               BellSign sign) {
  if (!(contrast >= 0.0 && contrast <= 1.0))
    throw std::invalid_argument("fidelity_report: contrast must lie in [0, 1]");
  FidelityReport report;
  report.fidelity =
      0.5 * (populations(index_of(TwoSpin::DownUp)) + populations(index_of(TwoSpin::UpDown)) +
             contrast);
  try {
    const auto rho = synthesize_rho(contrast, sign, populations);
    report.synthesized_fidelity = state_fidelity(rho, bell_vector<double>(sign));
  } catch (const std::domain_error&) {
    // Populations below C/2 admit no such decomposition.
  }
  return report;
}

NoiseModel calibrate_gamma(const NoiseModel& noise, const AddressingProfile& profile,
                           double target_gamma, const GammaCalibration& options) {
  noise.validate();
  if (!(target_gamma >= 0.0)) throw std::domain_error("calibrate_gamma: target must be >= 0");
  NoiseModel out = noise;
  out.gamma = target_gamma;
  if (target_gamma == 0.0) {
    out.rabi_noise_sigma = 0.0;
    return out;
  }

  auto fitted = [&](double sigma) {
    NoiseModel n = noise;
    n.rabi_noise_sigma = sigma;
    return rabi_scan(profile, n, options.t_grid, options.trials_per_point, options.seed)
        .param("gamma")
        .value;
  };
  auto close_enough = [&](double g) {
    return std::abs(g - target_gamma) <= options.relative_tolerance * target_gamma;
  };

  double lo = 0.0;
  double g_lo = fitted(lo);
  if (g_lo >= target_gamma) {
    if (std::abs(g_lo - target_gamma) <= 0.1 * target_gamma) {
      out.rabi_noise_sigma = 0.0;
      return out;
    }
    throw std::domain_error("calibrate_gamma: other noise sources already exceed the target decay");
  }
  double hi = 0.02;
  double g_hi = fitted(hi);
  while (g_hi < target_gamma) {
    lo = hi;
    g_lo = g_hi;
    hi *= 2.0;
    if (hi > 1.0) throw std::domain_error("calibrate_gamma: target decay unattainable");
    g_hi = fitted(hi);
  }

  // Illinois regula falsi on gamma_fit(sigma) - target.
  double f_lo = g_lo - target_gamma, f_hi = g_hi - target_gamma;
  double sigma = hi;
  double g = g_hi;
  int side = 0;
  for (int it = 0; it < 60 && !close_enough(g); ++it) {
    sigma = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    g = fitted(sigma);
    if (close_enough(g)) break;
    const double f = g - target_gamma;
    if ((f < 0.0) == (f_lo < 0.0)) {
      lo = sigma;
      f_lo = f;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = sigma;
      f_hi = f;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
  }
  if (std::abs(g - target_gamma) > 0.1 * target_gamma)
    throw std::domain_error("calibrate_gamma: no sigma reproduces the target decay within 10%");
  out.rabi_noise_sigma = sigma;
  return out;
}

}  // namespace ionent
