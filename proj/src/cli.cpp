#include "ionent/cli.hpp"

#include "ionent/errors.hpp"
#include "ionent/experiments.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace ionent {

namespace {

using json = nlohmann::json;

constexpr double kKHz = kTwoPi * 1e3;
constexpr std::uint64_t kGammaStream = 0x67616d6d61ULL;
constexpr std::uint64_t kRefStream = 0x72656673ULL;
constexpr std::uint64_t kObservationStream = 0x6f6273ULL;

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

// Shortest round-trip text, so identical numbers always print identically.
std::string num(double v) { return fmt("%.17g", v); }

struct Provenance {
  std::string hash;
  std::uint64_t seed = 0;
  bool seeded = false;

  explicit Provenance(const RunConfig& cfg)
      : hash(hex64(config_hash(cfg))), seed(cfg.seed.value_or(0)), seeded(cfg.seed.has_value()) {}

  std::string seed_text() const { return seeded ? std::to_string(seed) : "none"; }

  std::string comment(const char* experiment) const {
    return std::string("# ionent ") + experiment + " config_hash=" + hash + " seed=" + seed_text() +
           "\n";
  }

  json stamp(const char* experiment) const {
    json j;
    j["experiment"] = experiment;
    j["config_hash"] = hash;
    if (seeded) j["seed"] = seed;
    else j["seed"] = nullptr;
    return j;
  }
};

std::string path_for(const RunConfig& cfg, const std::string& suffix) {
  return cfg.output + "_" + suffix;
}

json fit_json(const FitParameter& p, double scale = 1.0) {
  return json{{"value", p.value / scale}, {"uncertainty", p.uncertainty / scale}};
}

json populations_json(const Populations<double>& p) {
  json j;
  for (TwoSpin s : kTwoSpinBasis) j[short_name(s)] = p(index_of(s));
  return j;
}

json profile_json(const AddressingProfile& p) {
  return json{{"xi_1_um", p.xi_1 * 1e6},         {"xi_2_um", p.xi_2 * 1e6},
              {"rabi_1_khz", p.Omega_1 / kKHz},  {"rabi_2_khz", p.Omega_2 / kKHz},
              {"omega_c_khz", p.Omega_c / kKHz}, {"harmonic_order", p.harmonic_order}};
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

std::string scan_csv(const ScanResult& scan, const Provenance& prov, const char* experiment,
                     bool with_signal) {
  std::ostringstream os;
  os << prov.comment(experiment);
  os << "abscissa,p_mixed,p_pure,n_trials";
  if (with_signal) os << ",signal,signal_stderr";
  os << '\n';
  for (const auto& pt : scan.points) {
    os << num(pt.abscissa) << ',' << num(pt.p_mixed) << ',' << num(pt.p_pure) << ',' << pt.trials;
    if (with_signal) os << ',' << num(pt.signal) << ',' << num(pt.signal_stderr);
    os << '\n';
  }
  return os.str();
}

void require_seed(const RunConfig& cfg) {
  if (cfg.stochastic() && !cfg.seed)
    throw ConfigError(std::string(experiment_name(cfg.experiment)) +
                      " is stochastic: give seed in the configuration or --seed");
}

// Noise used by the dynamics: off, explicit sigma, or sigma calibrated to
// the target decay rate.
NoiseModel resolve_noise(const RunConfig& cfg) {
  if (!cfg.noise.enabled) return NoiseModel::off();
  if (cfg.noise.rabi_noise_sigma) return cfg.noise.model;
  GammaCalibration options;
  options.trials_per_point = cfg.noise.calibration_trials;
  options.seed = derive_seed(cfg.seed.value_or(0), kGammaStream);
  return calibrate_gamma(cfg.noise.model, resolve_profile(cfg), cfg.noise.gamma_target, options);
}

DetectionModel resolve_detection(const RunConfig& cfg) {
  if (cfg.detection.target_tail) return calibrate_depump(cfg.detection.model, *cfg.detection.target_tail);
  return cfg.detection.model;
}

json noise_json(const RunConfig& cfg, const NoiseModel& n) {
  if (!cfg.noise.enabled) return json{{"enabled", false}};
  return json{{"enabled", true},
              {"gamma_target_khz", cfg.noise.gamma_target / kKHz},
              {"rabi_noise_sigma", n.rabi_noise_sigma},
              {"sigma_calibrated", !cfg.noise.rabi_noise_sigma.has_value()},
              {"stretch_ground_prob", n.stretch_ground_prob},
              {"com_nbar", n.com_nbar},
              {"com_eta", n.com_eta},
              {"alpha", n.alpha}};
}

json detection_json(const DetectionModel& m) {
  return json{{"tau_d_us", m.tau_d * 1e6},
              {"bright_counts_per_ion", m.bright_rate_per_ion},
              {"background_rate_per_s", m.background_rate},
              {"depump_time_constant_us", m.depump_time_constant * 1e6},
              {"dark_leak_prob", m.dark_leak_prob},
              {"intensity_sigma", m.intensity_sigma},
              {"alpha", m.alpha}};
}

RunOutcome run_rabi(const RunConfig& cfg) {
  const Provenance prov(cfg);
  const AddressingProfile profile = resolve_profile(cfg);
  const NoiseModel noise = resolve_noise(cfg);
  const auto grid = linspace(0.0, cfg.rabi.t_max, cfg.rabi.points);
  const ScanResult scan = rabi_scan(profile, noise, grid, cfg.rabi.trials, prov.seed);

  json j = prov.stamp("rabi");
  j["abscissa_unit"] = "s";
  j["profile"] = profile_json(profile);
  j["noise"] = noise_json(cfg, noise);
  j["fit"] = {{"rabi_1_khz", fit_json(scan.param("omega_1"), kKHz)},
              {"rabi_2_khz", fit_json(scan.param("omega_2"), kKHz)},
              {"gamma_khz", fit_json(scan.param("gamma"), kKHz)},
              {"alpha", fit_json(scan.param("alpha"))},
              {"chi2_reduced", scan.param("chi2_reduced").value}};
  j["trials_per_point"] = cfg.rabi.trials;

  RunOutcome out;
  out.files.push_back({path_for(cfg, "rabi.csv"), scan_csv(scan, prov, "rabi", true)});
  out.files.push_back({path_for(cfg, "rabi.json"), dump_json(j)});
  out.summary = "rabi: Omega_1/2pi = " + fmt("%.2f", scan.param("omega_1").value / kKHz) +
                " kHz, Omega_2/2pi = " + fmt("%.2f", scan.param("omega_2").value / kKHz) +
                " kHz, gamma/2pi = " + fmt("%.2f", scan.param("gamma").value / kKHz) +
                " kHz, alpha = " + fmt("%.3f", scan.param("alpha").value);
  return out;
}

// The entangling sequence as configured: the standard program or the custom
// pulse list with each pulse bound to its addressing profile.
std::vector<PulseSpec> entangle_sequence(const RunConfig& cfg, double phi) {
  const AddressingProfile prep = resolve_profile(cfg);
  const AddressingProfile rsb = resolve_rsb_profile(cfg);
  const double eta_prime = lamb_dicke_two_ion(cfg.trap.eta_single);
  if (cfg.entangle.sequence.empty()) return entangle_program(phi, rsb, eta_prime, prep);
  std::vector<PulseSpec> program = cfg.entangle.sequence;
  for (auto& p : program) {
    p.addressing = p.kind == PulseKind::RedSideband ? rsb : prep;
    p.entangle_phase_phi = phi;
    p.eta_prime = eta_prime;
  }
  return program;
}

struct EntangleResult {
  std::optional<JointState<double>> state;  // noise off
  DensityOperator<double> rho = DensityOperator<double>::pure(bell_vector<double>(BellSign::Minus));
  NoiseModel noise;
};

EntangleResult run_entangle_dynamics(const RunConfig& cfg, double phi) {
  EntangleResult r;
  r.noise = resolve_noise(cfg);
  const auto program = entangle_sequence(cfg, phi);
  const auto start = JointState<double>::basis({TwoSpin::DownDown, 0});
  const std::span<const PulseSpec> pulses(program);
  if (!cfg.noise.enabled) {
    r.state = apply_sequence(start, pulses, TrialNoise{});
    r.rho = reduce(*r.state);
    return r;
  }
  const std::uint64_t seed = cfg.seed.value_or(0);
  const std::uint64_t trials = cfg.entangle.trials;
  SpinMatrix<double> sum = SpinMatrix<double>::Zero();
  for (std::uint64_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, t);
    sum += reduce(apply_sequence(start, pulses, sample_trial_noise(r.noise, rng))).matrix();
  }
  SpinMatrix<double> m = sum / static_cast<double>(trials);
  m = 0.5 * (m + m.adjoint()).eval();
  m /= m.trace().real();
  r.rho = DensityOperator<double>::from_matrix(m);
  return r;
}

std::string rho_text(const DensityOperator<double>& rho) {
  std::ostringstream os;
  for (TwoSpin a : kTwoSpinBasis)
    for (TwoSpin b : kTwoSpinBasis) {
      const auto v = rho.matrix()(index_of(a), index_of(b));
      os << short_name(a) << ' ' << short_name(b) << '\t' << num(v.real()) << '\t' << num(v.imag())
         << '\n';
    }
  return os.str();
}

RunOutcome run_entangle(const RunConfig& cfg) {
  const Provenance prov(cfg);
  const double phi = resolve_phi(cfg);
  const EntangleResult r = run_entangle_dynamics(cfg, phi);
  const double f_minus = state_fidelity(r.rho, bell_vector<double>(BellSign::Minus));
  const double f_plus = state_fidelity(r.rho, bell_vector<double>(BellSign::Plus));

  json j = prov.stamp("entangle");
  j["phi_rad"] = phi;
  j["profile"] = profile_json(resolve_profile(cfg));
  j["rsb_profile"] = profile_json(resolve_rsb_profile(cfg));
  j["eta_prime"] = lamb_dicke_two_ion(cfg.trap.eta_single);
  j["noise"] = noise_json(cfg, r.noise);
  j["populations"] = populations_json(r.rho.populations());
  j["overlap2_bell_minus"] = f_minus;
  j["overlap2_bell_plus"] = f_plus;

  std::string state_text = prov.comment("entangle");
  if (r.state) {
    j["overlap2_psi_e"] = std::norm(overlap(psi_e<double>(phi, r.state->fock_levels()), *r.state));
    j["truncation_leakage"] = truncation_leakage(*r.state);
    state_text += "# joint state: spins stretch_n\tre\tim\n" + dump(*r.state);
  } else {
    j["trials"] = cfg.entangle.trials;
    state_text += "# spin density operator: row col\tre\tim\n" + rho_text(r.rho);
  }

  if (cfg.noise.enabled && cfg.detection.enabled) {
    // Populations as the detection pipeline would report them.
    const DetectionModel model = resolve_detection(cfg);
    const ReferenceSet refs =
        build_reference_histograms(model, cfg.histograms.trials, derive_seed(prov.seed, kRefStream));
    Rng rng = make_rng(prov.seed, kObservationStream);
    const Histogram obs = simulate_histogram(r.rho.populations(), model, cfg.entangle.trials, rng);
    const PopulationEstimate est = estimate_populations(obs, refs);
    j["detected_populations"] = populations_json(est.weights);
    j["detected_residual"] = est.residual;
  }

  RunOutcome out;
  out.files.push_back({path_for(cfg, "entangle_state.txt"), state_text});
  out.files.push_back({path_for(cfg, "entangle.json"), dump_json(j)});
  out.summary = "entangle: phi = " + fmt("%.6f", phi) + " rad, overlap^2(psi_B-) = " +
                fmt("%.6f", f_minus) + ", overlap^2(psi_B+) = " + fmt("%.6f", f_plus);
  return out;
}

DensityOperator<double> rotation_input(const RunConfig& cfg, json& info) {
  const RotateSpec& r = cfg.rotate;
  switch (r.source) {
    case RotateSource::Singlet:
      return DensityOperator<double>::pure(bell_vector<double>(BellSign::Minus));
    case RotateSource::Triplet:
      return DensityOperator<double>::pure(bell_vector<double>(BellSign::Plus));
    case RotateSource::Synthesized:
      info["input_contrast"] = r.contrast;
      info["input_populations"] = populations_json(r.populations);
      return synthesize_rho(r.contrast, r.sign, r.populations);
    case RotateSource::Entangle: {
      const double phi = resolve_phi(cfg);
      info["phi_rad"] = phi;
      return run_entangle_dynamics(cfg, phi).rho;
    }
  }
  throw std::logic_error("unhandled rotation source");
}

struct RotationRun {
  ScanResult scan;
  json info;
};

RotationRun rotation_run(const RunConfig& cfg, const Provenance& prov, const char* experiment) {
  RotationRun run;
  run.info = prov.stamp(experiment);
  const DensityOperator<double> rho = rotation_input(cfg, run.info);
  const auto grid = linspace(0.0, cfg.rotate.theta_max, cfg.rotate.theta_points);
  std::optional<DetectionModel> detection;
  if (cfg.detection.enabled) {
    detection = resolve_detection(cfg);
    run.info["detection"] = detection_json(*detection);
  } else {
    run.info["detection"] = nullptr;
  }
  run.scan = rotation_scan(rho, grid, cfg.rotate.trials, detection, prov.seed);
  run.info["abscissa_unit"] = "rad";
  run.info["trials_per_point"] = cfg.rotate.trials;
  json fit;
  for (const auto& [name, p] : run.scan.fit) fit[name] = fit_json(p);
  run.info["fit"] = fit;
  return run;
}

RunOutcome run_rotate(const RunConfig& cfg) {
  const Provenance prov(cfg);
  RotationRun run = rotation_run(cfg, prov, "rotate");
  RunOutcome out;
  out.files.push_back({path_for(cfg, "rotate.csv"), scan_csv(run.scan, prov, "rotate", false)});
  out.files.push_back({path_for(cfg, "rotate.json"), dump_json(run.info)});
  out.summary = "rotate: contrast = " + fmt("%.4f", run.scan.param("contrast").value) +
                ", coherence = " + fmt("%.4f", run.scan.param("coherence").value) + " +/- " +
                fmt("%.4f", run.scan.param("coherence").uncertainty);
  return out;
}

RunOutcome run_fidelity(const RunConfig& cfg) {
  const Provenance prov(cfg);
  RotationRun run = rotation_run(cfg, prov, "fidelity");
  const ScanPoint& zero = run.scan.points.front();  // theta = 0: populations as prepared
  const FitParameter coherence = run.scan.param("coherence");
  const double c = std::clamp(coherence.value, 0.0, 1.0);
  const FidelityReport report = fidelity_report(zero.populations, c, cfg.rotate.sign);
  // Per-point scatter of the scan stands in for the error of the theta = 0
  // population sum.
  const double sigma_mixed = run.scan.param("rms_residual").value;
  const double sigma = 0.5 * std::hypot(sigma_mixed, coherence.uncertainty);

  run.info["sign"] = cfg.rotate.sign == BellSign::Minus ? "minus" : "plus";
  run.info["populations"] = populations_json(zero.populations);
  run.info["contrast"] = fit_json({c, coherence.uncertainty});
  run.info["fidelity"] = fit_json({report.fidelity, sigma});
  if (report.synthesized_fidelity) run.info["synthesized_fidelity"] = *report.synthesized_fidelity;
  else run.info["synthesized_fidelity"] = nullptr;

  RunOutcome out;
  out.files.push_back({path_for(cfg, "fidelity.csv"), scan_csv(run.scan, prov, "fidelity", false)});
  out.files.push_back({path_for(cfg, "fidelity.json"), dump_json(run.info)});
  out.summary = "fidelity: F = " + fmt("%.3f", report.fidelity) + " +/- " + fmt("%.3f", sigma) +
                " (P_du + P_ud = " + fmt("%.3f", zero.p_mixed) + ", C = " + fmt("%.3f", c) + ")";
  return out;
}

Histogram read_histogram_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read histogram file " + path);
  try {
    return read_histogram(in);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string reference_suffix(TwoSpin s) { return std::string("ref_") + short_name(s) + ".hist"; }

RunOutcome run_estimate(const RunConfig& cfg) {
  const Provenance prov(cfg);
  ReferenceSet refs;
  for (TwoSpin s : kTwoSpinBasis)
    refs[index_of(s)] = read_histogram_file(cfg.estimate.references + "_" + reference_suffix(s));
  const Histogram obs = read_histogram_file(cfg.estimate.observed);
  const PopulationEstimate est = estimate_populations(obs, refs);

  json j = prov.stamp("estimate");
  j["observed"] = cfg.estimate.observed;
  j["references"] = cfg.estimate.references;
  j["observed_trials"] = obs.trials_N;
  j["populations"] = populations_json(est.weights);
  j["residual"] = est.residual;
  j["degenerate_references"] = est.degenerate;

  RunOutcome out;
  out.files.push_back({path_for(cfg, "estimate.json"), dump_json(j)});
  std::string s = "estimate:";
  for (TwoSpin t : kTwoSpinBasis)
    s += std::string(" P_") + short_name(t) + " = " + fmt("%.4f", est.weights(index_of(t)));
  s += ", residual = " + fmt("%.3g", est.residual);
  out.summary = s;
  return out;
}

RunOutcome run_classify(const RunConfig& cfg) {
  const Provenance prov(cfg);
  const CaseThresholds& th = cfg.classify.thresholds;
  std::array<std::uint64_t, 3> tally{};
  json per_count = json::array();
  if (!cfg.classify.histogram.empty()) {
    const Histogram h = read_histogram_file(cfg.classify.histogram);
    for (int m = 0; m <= h.cap(); ++m)
      tally[static_cast<int>(classify_case(m, th)) - 1] += h.counts[m];
  } else {
    for (int m : cfg.classify.counts) {
      const int c = static_cast<int>(classify_case(m, th));
      tally[c - 1] += 1;
      per_count.push_back(c);
    }
  }
  const double total = static_cast<double>(tally[0] + tally[1] + tally[2]);

  json j = prov.stamp("classify");
  j["t1"] = th.t1;
  j["t2"] = th.t2;
  j["cases"] = {{"1_up_up", tally[0]}, {"2_one_bright", tally[1]}, {"3_down_down", tally[2]}};
  j["fractions"] = {{"1_up_up", tally[0] / total},
                    {"2_one_bright", tally[1] / total},
                    {"3_down_down", tally[2] / total}};
  if (!per_count.empty()) j["per_count"] = per_count;

  RunOutcome out;
  out.files.push_back({path_for(cfg, "classify.json"), dump_json(j)});
  out.summary = "classify: (t1, t2) = (" + std::to_string(th.t1) + ", " + std::to_string(th.t2) +
                "), case 1: " + std::to_string(tally[0]) + ", case 2: " +
                std::to_string(tally[1]) + ", case 3: " + std::to_string(tally[2]);
  return out;
}

void write_files(const std::vector<OutputFile>& files) {
  for (const auto& f : files) {
    std::ofstream os(f.path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + f.path);
    os << f.contents;
    if (!os) throw std::runtime_error("error writing " + f.path);
  }
}

}  // namespace

RunOutcome emit_reference_bundle(const RunConfig& cfg) {
  require_seed(cfg);
  const Provenance prov(cfg);
  const DetectionModel model = resolve_detection(cfg);
  const ReferenceSet refs = build_reference_histograms(model, cfg.histograms.trials, prov.seed);
  const std::string extra = "seed=" + prov.seed_text() + " config_hash=" + prov.hash;

  RunOutcome out;
  for (TwoSpin s : kTwoSpinBasis) {
    std::ostringstream os;
    write_histogram(os, refs[index_of(s)], model.tau_d, extra + " state=" + short_name(s));
    out.files.push_back({path_for(cfg, reference_suffix(s)), os.str()});
  }

  const Histogram& uu = refs[index_of(TwoSpin::UpUp)];
  std::uint64_t tail = 0;
  for (int m = 3; m <= uu.cap(); ++m) tail += uu.counts[m];
  const double tail_analytic = up_up_tail_probability(model);
  const double tail_sampled = static_cast<double>(tail) / static_cast<double>(uu.trials_N);
  const ThresholdResult best = optimize_thresholds(refs, cfg.histograms.priors);
  const CaseThresholds default_thresholds{};
  const double default_accuracy = threshold_accuracy(refs, default_thresholds, cfg.histograms.priors);

  json j = prov.stamp("histograms");
  j["trials_per_reference"] = cfg.histograms.trials;
  j["detection"] = detection_json(model);
  if (cfg.detection.target_tail) j["target_up_up_tail"] = *cfg.detection.target_tail;
  j["up_up_tail_analytic"] = tail_analytic;
  j["up_up_tail_sampled"] = tail_sampled;
  json means;
  for (TwoSpin s : kTwoSpinBasis) means[short_name(s)] = refs[index_of(s)].mean();
  j["mean_counts"] = means;
  j["priors"] = cfg.histograms.priors;
  j["optimal_thresholds"] = {{"t1", best.thresholds.t1}, {"t2", best.thresholds.t2},
                             {"accuracy", best.accuracy}};
  j["default_thresholds"] = {{"t1", default_thresholds.t1}, {"t2", default_thresholds.t2},
                             {"accuracy", default_accuracy}};
  out.files.push_back({path_for(cfg, "calibration.json"), dump_json(j)});

  out.summary = "calibrate: P(m > 2 | uu) = " + fmt("%.4f", tail_analytic) + " (sampled " +
                fmt("%.4f", tail_sampled) + "), optimal thresholds (" +
                std::to_string(best.thresholds.t1) + ", " + std::to_string(best.thresholds.t2) +
                ") accuracy " + fmt("%.3f", best.accuracy) + ", (3, 17) accuracy " +
                fmt("%.3f", default_accuracy);
  return out;
}

RunOutcome run_experiment(const RunConfig& cfg) {
  require_seed(cfg);
  switch (cfg.experiment) {
    case Experiment::Rabi: return run_rabi(cfg);
    case Experiment::Entangle: return run_entangle(cfg);
    case Experiment::Rotate: return run_rotate(cfg);
    case Experiment::Histograms: return emit_reference_bundle(cfg);
    case Experiment::Estimate: return run_estimate(cfg);
    case Experiment::Classify: return run_classify(cfg);
    case Experiment::Fidelity: return run_fidelity(cfg);
  }
  throw std::logic_error("unhandled experiment");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-ion entanglement simulator", "ionent"};
  app.require_subcommand(1);

  std::string config_path;
  ConfigOverrides overrides;
  std::uint64_t seed = 0, trials = 0;
  std::string prefix;
  std::optional<Experiment> chosen;

  auto leaf = [&](CLI::App* group, const char* name, const char* help, Experiment e) {
    CLI::App* sub = group->add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "base seed (overrides the file)");
    sub->add_option("--out", prefix, "output path prefix (overrides the file)");
    sub->add_option("--trials", trials, "trials per point or per histogram");
    sub->callback([&chosen, e] { chosen = e; });
    return sub;
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run a dynamics experiment");
  simulate->require_subcommand(1);
  leaf(simulate, "rabi", "x-carrier Rabi scan and fit", Experiment::Rabi);
  leaf(simulate, "entangle", "entangling sequence", Experiment::Entangle);
  leaf(simulate, "rotate", "equal-rotation scan", Experiment::Rotate);
  CLI::App* detect = app.add_subcommand("detect", "fluorescence detection tools");
  detect->require_subcommand(1);
  leaf(detect, "calibrate", "reference histograms and threshold calibration", Experiment::Histograms);
  leaf(detect, "estimate", "population estimate from a histogram", Experiment::Estimate);
  leaf(detect, "classify", "threshold classification of photon counts", Experiment::Classify);
  CLI::App* report = app.add_subcommand("report", "derived results");
  report->require_subcommand(1);
  leaf(report, "fidelity", "Bell-state fidelity from populations and contrast", Experiment::Fidelity);

  std::vector<std::string> argv_store{"ionent"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    err << "ionent: " << e.what() << '\n';
    return kExitConfig;
  }

  // Options are looked up on whichever leaf ran.
  for (CLI::App* group : app.get_subcommands())
    for (CLI::App* sub : group->get_subcommands()) {
      if (sub->count("--seed")) overrides.seed = seed;
      if (sub->count("--out")) overrides.output = prefix;
      if (sub->count("--trials")) overrides.trials = trials;
    }

  RunConfig cfg;
  try {
    cfg = load_config(config_path, *chosen, overrides);
    require_seed(cfg);
  } catch (const ConfigError& e) {
    err << "ionent: configuration error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const RunOutcome outcome = run_experiment(cfg);
    write_files(outcome.files);
    out << outcome.summary << '\n';
  } catch (const ConfigError& e) {
    err << "ionent: configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "ionent: " << experiment_name(cfg.experiment) << " failed: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitSuccess;
}

}  // namespace ionent
