#include "ionent/detection.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ionent {

namespace {

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [a, b].
Quadrature gauss_legendre(int n, double a, double b) {
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.nodes[i] = 0.5 * (b - a) * x + 0.5 * (b + a);
    q.weights[i] = (b - a) / ((1.0 - x * x) * dp * dp);
  }
  return q;
}

double poisson_cdf(int k, double lambda) {
  double term = std::exp(-lambda);
  double sum = term;
  for (int j = 1; j <= k; ++j) {
    term *= lambda / j;
    sum += term;
  }
  return sum;
}

int draw_poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

Eigen::VectorXd normalized(const Histogram& h) {
  if (h.trials_N == 0) throw std::invalid_argument("histogram has no trials");
  return h.probabilities();
}

}  // namespace

void DetectionModel::validate() const {
  if (!(tau_d > 0.0)) throw std::invalid_argument("DetectionModel: tau_d must be positive");
  if (!(bright_rate_per_ion >= 0.0) || !(background_rate >= 0.0))
    throw std::invalid_argument("DetectionModel: rates must be non-negative");
  if (!(depump_time_constant > 0.0))
    throw std::invalid_argument("DetectionModel: depump time constant must be positive");
  if (!(dark_leak_prob >= 0.0 && dark_leak_prob <= 1.0))
    throw std::invalid_argument("DetectionModel: dark_leak_prob must lie in [0, 1]");
  if (!(intensity_sigma >= 0.0))
    throw std::invalid_argument("DetectionModel: intensity_sigma must be non-negative");
  if (!(std::abs(alpha) <= 0.2)) throw std::invalid_argument("DetectionModel: |alpha| must be <= 0.2");
}

void Histogram::add(int m) {
  if (m < 0) throw std::invalid_argument("Histogram: negative photon count");
  ++counts[std::min(m, cap())];
  ++trials_N;
}

void Histogram::merge(const Histogram& other) {
  if (other.counts.size() != counts.size())
    throw std::invalid_argument("Histogram: bin ranges differ");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  trials_N += other.trials_N;
}

Eigen::VectorXd Histogram::probabilities() const {
  Eigen::VectorXd p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p(i) = static_cast<double>(counts[i]);
  return trials_N > 0 ? Eigen::VectorXd(p / static_cast<double>(trials_N)) : p;
}

double Histogram::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) s += static_cast<double>(i * counts[i]);
  return trials_N > 0 ? s / static_cast<double>(trials_N) : 0.0;
}

void CaseThresholds::validate() const {
  if (!(t1 >= 0 && t1 < t2)) throw std::invalid_argument("CaseThresholds: need 0 <= t1 < t2");
}

// ---------------------------------------------------------------------------

int sample_photon_count(TwoSpin label, const DetectionModel& model, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> depump(1.0 / model.depump_time_constant);

  const double g = std::max(0.0, 1.0 + model.intensity_sigma * normal(rng));
  double mean = model.background_mean();
  for (int ion = 0; ion < 2; ++ion) {
    const double efficiency = ion == 0 ? 1.0 + model.alpha : 1.0 - model.alpha;
    const double bright = efficiency * model.bright_rate_per_ion * g;
    if (spin_of(label, ion) == Spin::Down) {
      // Imperfect D2 polarization pumps the ion dark at a uniform onset time.
      const bool leaks = uniform(rng) < model.dark_leak_prob;
      const double onset = uniform(rng);
      mean += bright * (leaks ? onset : 1.0);
    } else {
      const double s = depump(rng);
      if (s < model.tau_d) mean += bright * (1.0 - s / model.tau_d);
    }
  }
  return draw_poisson(mean, rng);
}

int sample_photon_count(TwoSpin label, const DetectionModel& model, std::uint64_t seed) {
  Rng rng(seed);
  return sample_photon_count(label, model, rng);
}

double up_up_tail_probability(const DetectionModel& model, int threshold) {
  model.validate();
  const double kappa = model.tau_d / model.depump_time_constant;
  const double no_depump = std::exp(-kappa);
  const double bg = model.background_mean();
  const double c1 = (1.0 + model.alpha) * model.bright_rate_per_ion;
  const double c2 = (1.0 - model.alpha) * model.bright_rate_per_ion;

  static const Quadrature pq = gauss_legendre(64, 0.0, 1.0);

  // Depump onsets by quantile: an onset inside the window has probability
  // 1 - e^{-kappa}; map uniform p on that mass back to the window fraction.
  const double depump_mass = -std::expm1(-kappa);
  std::vector<double> lit(pq.nodes.size());
  std::vector<double> weight(pq.nodes.size());
  for (std::size_t i = 0; i < pq.nodes.size(); ++i) {
    const double p = pq.nodes[i] * depump_mass;
    const double onset = -std::log1p(-p) / kappa;
    lit[i] = std::max(0.0, 1.0 - onset);
    weight[i] = pq.weights[i] * depump_mass;
  }

  auto expected_cdf = [&](double g) {
    double sum = no_depump * no_depump * poisson_cdf(threshold, bg);
    for (std::size_t i = 0; i < lit.size(); ++i) {
      sum += no_depump * weight[i] *
             (poisson_cdf(threshold, bg + c1 * g * lit[i]) + poisson_cdf(threshold, bg + c2 * g * lit[i]));
      for (std::size_t j = 0; j < lit.size(); ++j) {
        sum += weight[i] * weight[j] * poisson_cdf(threshold, bg + g * (c1 * lit[i] + c2 * lit[j]));
      }
    }
    return sum;
  };

  double cdf = 0.0;
  if (model.intensity_sigma == 0.0) {
    cdf = expected_cdf(1.0);
  } else {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double z_clamp = -1.0 / model.intensity_sigma;  // g clamps to 0 below this
    const double clamped_mass = 0.5 * std::erfc(-z_clamp / std::numbers::sqrt2);
    cdf = clamped_mass * expected_cdf(0.0);
    const Quadrature zq = gauss_legendre(96, std::max(-8.0, z_clamp), 8.0);
    for (std::size_t k = 0; k < zq.nodes.size(); ++k) {
      const double z = zq.nodes[k];
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * z * z);
      cdf += zq.weights[k] * pdf * expected_cdf(1.0 + model.intensity_sigma * z);
    }
  }
  return 1.0 - cdf;
}

DetectionModel calibrate_depump(const DetectionModel& model, double target_tail) {
  model.validate();
  if (!(target_tail > 0.0 && target_tail < 0.5))
    throw std::domain_error("calibrate_depump: target tail must lie in (0, 0.5)");

  DetectionModel m = model;
  auto tail_at = [&](double log_tau) {
    m.depump_time_constant = std::exp(log_tau);
    return up_up_tail_probability(m);
  };
  double lo = std::log(1e-6), hi = std::log(1e4);
  if (target_tail >= tail_at(lo) || target_tail <= tail_at(hi))
    throw std::domain_error("calibrate_depump: target tail unattainable for this model");
  // The tail falls monotonically with the depump time constant.
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (tail_at(mid) > target_tail)
      lo = mid;
    else
      hi = mid;
  }
  m.depump_time_constant = std::exp(0.5 * (lo + hi));
  return m;
}

Histogram simulate_histogram(const Populations<double>& populations, const DetectionModel& model,
                             std::uint64_t trials_N, Rng& rng) {
  model.validate();
  if ((populations.array() < -1e-12).any() || std::abs(populations.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("simulate_histogram: populations must form a distribution");
  std::discrete_distribution<int> pick(populations.data(), populations.data() + 4);
  Histogram h;
  for (std::uint64_t i = 0; i < trials_N; ++i) {
    const TwoSpin label = static_cast<TwoSpin>(pick(rng));
    h.add(sample_photon_count(label, model, rng));
  }
  return h;
}

ReferenceSet build_reference_histograms(const DetectionModel& model, std::uint64_t trials_N,
                                        std::uint64_t seed) {
  model.validate();
  if (trials_N < 1) throw std::invalid_argument("build_reference_histograms: trials_N must be >= 1");
  ReferenceSet refs;
  for (TwoSpin label : kTwoSpinBasis) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(index_of(label)));
    Histogram& h = refs[index_of(label)];
    for (std::uint64_t i = 0; i < trials_N; ++i) h.add(sample_photon_count(label, model, rng));
  }
  return refs;
}

// ---------------------------------------------------------------------------

PopulationEstimate estimate_populations(const Eigen::VectorXd& observed,
                                        const std::array<Eigen::VectorXd, 4>& refs) {
  const Eigen::Index bins = observed.size();
  Eigen::MatrixXd a(bins, 4);
  for (int k = 0; k < 4; ++k) {
    if (refs[k].size() != bins)
      throw std::invalid_argument("estimate_populations: reference bin range differs");
    const double total = refs[k].sum();
    if (!(total > 0.0)) throw std::invalid_argument("estimate_populations: empty reference");
    a.col(k) = refs[k] / total;
  }
  const double obs_total = observed.sum();
  if (!(obs_total > 0.0)) throw std::invalid_argument("estimate_populations: empty observation");
  const Eigen::VectorXd h = observed / obs_total;

  PopulationEstimate best;
  best.residual = std::numeric_limits<double>::infinity();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  best.degenerate = qr.rank() < 4;

  // The simplex has 15 faces; on each, solve the equality-constrained problem
  // through its KKT system and keep the best feasible stationary point.
  const Eigen::Matrix4d gram = a.transpose() * a;
  const Eigen::Vector4d rhs = a.transpose() * h;
  for (int mask = 1; mask < 16; ++mask) {
    std::vector<int> support;
    for (int k = 0; k < 4; ++k)
      if (mask & (1 << k)) support.push_back(k);
    const int n = static_cast<int>(support.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
    Eigen::VectorXd b(n + 1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) kkt(i, j) = gram(support[i], support[j]);
      kkt(i, n) = 1.0;
      kkt(n, i) = 1.0;
      b(i) = rhs(support[i]);
    }
    b(n) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(b);
    if ((sol.head(n).array() < -1e-12).any()) continue;

    Populations<double> w = Populations<double>::Zero();
    for (int i = 0; i < n; ++i) w(support[i]) = std::max(0.0, sol(i));
    w /= w.sum();
    const double r = (h - a * w).norm();
    if (r < best.residual) {
      best.residual = r;
      best.weights = w;
    }
  }
  return best;
}

PopulationEstimate estimate_populations(const Histogram& observed, const ReferenceSet& refs) {
  std::array<Eigen::VectorXd, 4> r;
  for (int k = 0; k < 4; ++k) {
    if (refs[k].counts.size() != observed.counts.size())
      throw std::invalid_argument("estimate_populations: reference bin range differs");
    r[k] = normalized(refs[k]);
  }
  return estimate_populations(normalized(observed), r);
}

// ---------------------------------------------------------------------------

DetectionCase classify_case(int m, const CaseThresholds& th) {
  if (m <= th.t1) return DetectionCase::UpUp;
  if (m >= th.t2) return DetectionCase::DownDown;
  return DetectionCase::OneBright;
}

namespace {

struct CumulativeRefs {
  // cum[k][m] = P(count < m) for reference k, m = 0..cap+1
  std::array<std::vector<double>, 4> cum;

  explicit CumulativeRefs(const ReferenceSet& refs) {
    for (int k = 0; k < 4; ++k) {
      const Eigen::VectorXd p = normalized(refs[k]);
      cum[k].assign(p.size() + 1, 0.0);
      for (Eigen::Index m = 0; m < p.size(); ++m) cum[k][m + 1] = cum[k][m] + p(m);
    }
  }

  double mass(TwoSpin s, int lo, int hi_exclusive) const {
    const auto& c = cum[index_of(s)];
    const int top = static_cast<int>(c.size()) - 1;
    lo = std::clamp(lo, 0, top);
    hi_exclusive = std::clamp(hi_exclusive, 0, top);
    return hi_exclusive > lo ? c[hi_exclusive] - c[lo] : 0.0;
  }

  double accuracy(int t1, int t2, const CasePriors& priors) const {
    const int end = static_cast<int>(cum[0].size()) - 1;
    const double p1 = mass(TwoSpin::UpUp, 0, t1 + 1);
    const double p2 =
        0.5 * (mass(TwoSpin::DownUp, t1 + 1, t2) + mass(TwoSpin::UpDown, t1 + 1, t2));
    const double p3 = mass(TwoSpin::DownDown, t2, end);
    return priors[0] * p1 + priors[1] * p2 + priors[2] * p3;
  }
};

void check_priors(const CasePriors& priors) {
  double sum = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0)) throw std::invalid_argument("case priors must be non-negative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("case priors must sum to 1");
}

}  // namespace

double threshold_accuracy(const ReferenceSet& refs, const CaseThresholds& th,
                          const CasePriors& priors) {
  th.validate();
  check_priors(priors);
  return CumulativeRefs(refs).accuracy(th.t1, th.t2, priors);
}

ThresholdResult optimize_thresholds(const ReferenceSet& refs, const CasePriors& priors) {
  check_priors(priors);
  const CumulativeRefs cum(refs);
  const int cap = refs[0].cap();
  ThresholdResult best;
  best.accuracy = -1.0;
  for (int t1 = 0; t1 <= cap; ++t1) {
    for (int t2 = t1 + 1; t2 <= cap + 1; ++t2) {
      const double acc = cum.accuracy(t1, t2, priors);
      if (acc > best.accuracy) {
        best.accuracy = acc;
        best.thresholds = {t1, t2};
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

void write_histogram(std::ostream& os, const Histogram& h, double tau_d,
                     const std::string& extra_header) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", tau_d * 1e6);
  os << "# trials=" << h.trials_N << " tau_d_us=" << buf;
  if (!extra_header.empty()) os << ' ' << extra_header;
  os << '\n';
  for (std::size_t m = 0; m < h.counts.size(); ++m) os << m << '\t' << h.counts[m] << '\n';
}

Histogram read_histogram(std::istream& is) {
  std::string line;
  std::uint64_t declared = 0;
  bool have_header = false;
  std::vector<std::uint64_t> counts;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        if (tok.rfind("trials=", 0) == 0) {
          declared = std::stoull(tok.substr(7));
          have_header = true;
        }
      }
      continue;
    }
    std::istringstream ls(line);
    long long m = -1;
    long long c = -1;
    if (!(ls >> m >> c) || m < 0 || c < 0)
      throw std::invalid_argument("read_histogram: malformed line '" + line + "'");
    if (static_cast<std::size_t>(m) != counts.size())
      throw std::invalid_argument("read_histogram: bins must be consecutive from 0");
    counts.push_back(static_cast<std::uint64_t>(c));
  }
  if (!have_header) throw std::invalid_argument("read_histogram: missing '# trials=' header");
  if (counts.empty()) throw std::invalid_argument("read_histogram: no bins");
  Histogram h;
  h.counts = std::move(counts);
  for (auto c : h.counts) h.trials_N += c;
  if (h.trials_N != declared)
    throw std::invalid_argument("read_histogram: counts do not sum to the declared trials");
  return h;
}

}  // namespace ionent
