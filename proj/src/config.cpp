#include "ionent/config.hpp"

#include "ionent/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace ionent {

namespace {

using json = nlohmann::json;

constexpr double kMHz = kTwoPi * 1e6;
constexpr double kKHz = kTwoPi * 1e3;
constexpr double kMicro = 1e-6;

// A JSON object whose keys must all be consumed; anything left over is a
// schema violation.
class Section {
 public:
  Section(const json& j, std::string path) : path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(label() + " must be an object");
    node_ = &j;
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = node_->begin(); it != node_->end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key " + key_path(it.key()));
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return node_->contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return node_->at(key);
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? as_number(key) : fallback;
  }

  std::optional<double> optional_number(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as_number(key);
  }

  double as_number(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(key_path(key) + " must be finite");
    return d;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ConfigError(key_path(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key) + " must be an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + " must be a string");
    return v.get<std::string>();
  }

 private:
  std::string label() const { return path_.empty() ? "configuration" : path_; }

  const json* node_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void parse_trap(Section& s, TrapConfig& t) {
  t.omega_x = s.number("omega_x_mhz", t.omega_x / kMHz) * kMHz;
  t.omega_y = s.number("omega_y_mhz", t.omega_y / kMHz) * kMHz;
  t.omega_z = s.number("omega_z_mhz", t.omega_z / kMHz) * kMHz;
  t.eta_single = s.number("eta_single", t.eta_single);
  t.ion_spacing_l = s.number("ion_spacing_um", t.ion_spacing_l / kMicro) * kMicro;
  t.delta_k_mag = s.number("delta_k_per_um", t.delta_k_mag * kMicro) / kMicro;
  t.U0_volts = s.number("u0_volts", t.U0_volts);
  t.U0_phase_zero = s.number("u0_phase_zero_volts", t.U0_phase_zero);
  t.U0_phase_pi = s.number("u0_phase_pi_volts", t.U0_phase_pi);
}

void parse_addressing(Section& s, AddressingSpec& a) {
  const auto ratio = s.optional_number("ratio");
  const auto displacement = s.optional_number("displacement_um");
  require(!(ratio && displacement), "addressing: give either ratio or displacement_um, not both");
  if (displacement) {
    a.ratio.reset();
    a.displacement = *displacement * kMicro;
  } else if (ratio) {
    a.ratio = *ratio;
  }
  const auto rabi_1 = s.optional_number("rabi_1_khz");
  const auto omega_c = s.optional_number("omega_c_khz");
  require(!(rabi_1 && omega_c), "addressing: give either rabi_1_khz or omega_c_khz, not both");
  if (omega_c) {
    a.omega_c = *omega_c * kKHz;
    a.rabi_1.reset();
  } else if (rabi_1) {
    a.rabi_1 = *rabi_1 * kKHz;
  }
  a.harmonic_order = s.integer("harmonic_order", a.harmonic_order);
  a.rsb_ratio = s.optional_number("rsb_ratio");

  require(a.harmonic_order == 0 || a.harmonic_order == 1,
          "addressing.harmonic_order must be 0 or 1");
  require(!(a.ratio && a.harmonic_order != 0),
          "addressing: a target ratio is solved on the carrier; use displacement_um for harmonic_order 1");
  require(!a.ratio || *a.ratio >= 1.0, "addressing.ratio must be >= 1");
  require(!a.rsb_ratio || *a.rsb_ratio >= 1.0, "addressing.rsb_ratio must be >= 1");
  require(!a.displacement || *a.displacement >= 0.0, "addressing.displacement_um must be >= 0");
  require(!a.rabi_1 || *a.rabi_1 > 0.0, "addressing.rabi_1_khz must be > 0");
  require(!a.omega_c || *a.omega_c > 0.0, "addressing.omega_c_khz must be > 0");
}

void parse_noise(Section& s, NoiseSpec& n) {
  n.enabled = s.boolean("enabled", n.enabled);
  n.gamma_target = s.number("gamma_khz", n.gamma_target / kKHz) * kKHz;
  n.rabi_noise_sigma = s.optional_number("rabi_noise_sigma");
  n.model.stretch_ground_prob = s.number("stretch_ground_prob", n.model.stretch_ground_prob);
  n.model.com_nbar = s.number("com_nbar", n.model.com_nbar);
  n.model.com_eta = s.number("com_eta", n.model.com_eta);
  n.model.alpha = s.number("alpha", n.model.alpha);
  n.calibration_trials = s.count("calibration_trials", n.calibration_trials);
  require(n.gamma_target >= 0.0, "noise.gamma_khz must be >= 0");
  require(n.calibration_trials > 0, "noise.calibration_trials must be > 0");
  n.model.gamma = n.gamma_target;
  if (n.rabi_noise_sigma) n.model.rabi_noise_sigma = *n.rabi_noise_sigma;
}

void parse_detection(Section& s, DetectionSpec& d) {
  DetectionModel& m = d.model;
  d.enabled = s.boolean("enabled", d.enabled);
  m.tau_d = s.number("tau_d_us", m.tau_d / kMicro) * kMicro;
  m.bright_rate_per_ion = s.number("bright_counts_per_ion", m.bright_rate_per_ion);
  m.background_rate = s.number("background_rate_per_s", m.background_rate);
  m.dark_leak_prob = s.number("dark_leak_prob", m.dark_leak_prob);
  m.intensity_sigma = s.number("intensity_sigma", m.intensity_sigma);
  m.alpha = s.number("alpha", m.alpha);
  const auto tau = s.optional_number("depump_time_constant_us");
  const auto tail = s.optional_number("target_up_up_tail");
  require(!(tau && tail),
          "detection: give either depump_time_constant_us or target_up_up_tail, not both");
  if (tau) {
    m.depump_time_constant = *tau * kMicro;
    d.target_tail.reset();
  } else if (tail) {
    require(*tail > 0.0 && *tail < 1.0, "detection.target_up_up_tail must lie in (0, 1)");
    d.target_tail = *tail;
  }
}

PulseKind parse_pulse_kind(const std::string& name) {
  if (name == "x_carrier") return PulseKind::XCarrier;
  if (name == "co_carrier") return PulseKind::CoCarrier;
  if (name == "red_sideband") return PulseKind::RedSideband;
  throw ConfigError("entangle.sequence: unknown pulse kind '" + name +
                    "' (x_carrier, co_carrier, red_sideband)");
}

void parse_entangle(Section& s, EntangleSpec& e) {
  e.phi = s.optional_number("phi_rad");
  e.u0_volts = s.optional_number("u0_volts");
  e.trials = s.count("trials", e.trials);
  require(!(e.phi && e.u0_volts), "entangle: give exactly one of phi_rad or u0_volts");
  if (s.has("sequence")) {
    const json& seq = s.at("sequence");
    require(seq.is_array(), "entangle.sequence must be an array");
    for (std::size_t i = 0; i < seq.size(); ++i) {
      Section p(seq[i], "entangle.sequence[" + std::to_string(i) + "]");
      PulseSpec pulse;
      if (!p.has("kind")) throw ConfigError(p.key_path("kind") + " is required");
      pulse.kind = parse_pulse_kind(p.string("kind", ""));
      if (!p.has("duration_us")) throw ConfigError(p.key_path("duration_us") + " is required");
      pulse.duration = p.as_number("duration_us") * kMicro;
      pulse.drive_phase = p.number("phase_rad", 0.0);
      require(pulse.duration >= 0.0, p.key_path("duration_us") + " must be >= 0");
      e.sequence.push_back(pulse);
    }
  }
}

Populations<double> parse_populations(Section& s, const std::string& key, Populations<double> p) {
  if (!s.has(key)) return p;
  const json& v = s.at(key);
  require(v.is_array() && v.size() == 4, s.key_path(key) + " must be an array of 4 numbers");
  for (int i = 0; i < 4; ++i) {
    require(v[i].is_number(), s.key_path(key) + " must be an array of 4 numbers");
    p(i) = v[i].get<double>();
  }
  require((p.array() >= 0.0).all() && std::abs(p.sum() - 1.0) < 1e-9,
          s.key_path(key) + " must be nonnegative and sum to 1");
  return p;
}

void parse_rotate(Section& s, RotateSpec& r) {
  const std::string source = s.string("source", "synthesized");
  if (source == "synthesized") r.source = RotateSource::Synthesized;
  else if (source == "entangle") r.source = RotateSource::Entangle;
  else if (source == "singlet") r.source = RotateSource::Singlet;
  else if (source == "triplet") r.source = RotateSource::Triplet;
  else throw ConfigError("rotate.source must be synthesized, entangle, singlet or triplet");
  r.contrast = s.number("contrast", r.contrast);
  const std::string sign = s.string("sign", "minus");
  require(sign == "minus" || sign == "plus", "rotate.sign must be minus or plus");
  r.sign = sign == "minus" ? BellSign::Minus : BellSign::Plus;
  r.populations = parse_populations(s, "populations", r.populations);
  r.theta_points = s.count("theta_points", r.theta_points);
  r.theta_max = s.number("theta_max_rad", r.theta_max);
  r.trials = s.count("trials", r.trials);
  require(r.contrast >= 0.0 && r.contrast <= 1.0, "rotate.contrast must lie in [0, 1]");
  require(r.theta_points >= 4, "rotate.theta_points must be >= 4");
  require(r.theta_max > 0.0, "rotate.theta_max_rad must be > 0");
}

void parse_histograms(Section& s, HistogramSpec& h) {
  h.trials = s.count("trials", h.trials);
  if (s.has("priors")) {
    const json& v = s.at("priors");
    require(v.is_array() && v.size() == 3, "histograms.priors must be an array of 3 numbers");
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
      require(v[i].is_number() && v[i].get<double>() >= 0.0,
              "histograms.priors entries must be nonnegative numbers");
      h.priors[i] = v[i].get<double>();
      total += h.priors[i];
    }
    require(total > 0.0, "histograms.priors must not all be zero");
    for (double& p : h.priors) p /= total;
  }
}

void parse_classify(Section& s, ClassifySpec& c) {
  c.thresholds.t1 = s.integer("t1", c.thresholds.t1);
  c.thresholds.t2 = s.integer("t2", c.thresholds.t2);
  try {
    c.thresholds.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("classify: ") + e.what());
  }
  if (s.has("counts")) {
    const json& v = s.at("counts");
    require(v.is_array(), "classify.counts must be an array of integers");
    for (const auto& m : v) {
      require(m.is_number_integer() && m.get<int>() >= 0,
              "classify.counts must be an array of non-negative integers");
      c.counts.push_back(m.get<int>());
    }
  }
  c.histogram = s.string("histogram", "");
}

template <typename Parser, typename Target>
void section(Section& root, const char* name, Parser parse, Target& target) {
  if (!root.has(name)) return;
  Section s(root.at(name), name);
  parse(s, target);
}

const char* trials_section(Experiment e) {
  switch (e) {
    case Experiment::Rabi: return "rabi";
    case Experiment::Entangle: return "entangle";
    case Experiment::Rotate:
    case Experiment::Fidelity: return "rotate";
    case Experiment::Histograms: return "histograms";
    default: return nullptr;
  }
}

}  // namespace

const char* experiment_name(Experiment e) {
  switch (e) {
    case Experiment::Rabi: return "rabi";
    case Experiment::Entangle: return "entangle";
    case Experiment::Rotate: return "rotate";
    case Experiment::Histograms: return "histograms";
    case Experiment::Estimate: return "estimate";
    case Experiment::Classify: return "classify";
    case Experiment::Fidelity: return "fidelity";
  }
  return "?";
}

bool RunConfig::stochastic() const {
  switch (experiment) {
    case Experiment::Rabi:
    case Experiment::Entangle: return noise.enabled;
    case Experiment::Rotate:
      return detection.enabled || (rotate.source == RotateSource::Entangle && noise.enabled);
    case Experiment::Histograms:
    case Experiment::Fidelity: return true;
    case Experiment::Estimate:
    case Experiment::Classify: return false;
  }
  return true;
}

RunConfig parse_config(const std::string& text, Experiment experiment,
                       const ConfigOverrides& overrides) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  require(j.is_object(), "configuration must be a JSON object");
  if (overrides.seed) j["seed"] = *overrides.seed;
  if (overrides.output) j["output"] = *overrides.output;
  if (overrides.trials) {
    const char* target = trials_section(experiment);
    if (!target)
      throw ConfigError(std::string("--trials does not apply to ") + experiment_name(experiment));
    if (j.contains(target) && !j[target].is_object())
      throw ConfigError(std::string(target) + " must be an object");
    j[target]["trials"] = *overrides.trials;
  }

  RunConfig cfg;
  cfg.experiment = experiment;
  {
    Section root(j, "");
    if (root.has("experiment")) {
      const std::string name = root.string("experiment", "");
      require(name == experiment_name(experiment),
              "configuration is for experiment '" + name + "', not '" +
                  experiment_name(experiment) + "'");
    }
    if (root.has("seed")) {
      const json& v = root.at("seed");
      require(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0),
              "seed must be a non-negative 64-bit integer");
      cfg.seed = v.get<std::uint64_t>();
    }
    cfg.output = root.string("output", cfg.output);
    require(!cfg.output.empty(), "output prefix must not be empty");
    section(root, "trap", parse_trap, cfg.trap);
    section(root, "addressing", parse_addressing, cfg.addressing);
    section(root, "noise", parse_noise, cfg.noise);
    section(root, "detection", parse_detection, cfg.detection);
    section(root, "rabi", [](Section& s, RabiSpec& r) {
      r.t_max = s.number("t_max_us", r.t_max / kMicro) * kMicro;
      r.points = s.count("points", r.points);
      r.trials = s.count("trials", r.trials);
      require(r.t_max > 0.0, "rabi.t_max_us must be > 0");
      require(r.points >= 6, "rabi.points must be >= 6");
    }, cfg.rabi);
    section(root, "entangle", parse_entangle, cfg.entangle);
    section(root, "rotate", parse_rotate, cfg.rotate);
    section(root, "histograms", parse_histograms, cfg.histograms);
    section(root, "estimate", [](Section& s, EstimateSpec& e) {
      e.observed = s.string("observed", e.observed);
      e.references = s.string("references", e.references);
    }, cfg.estimate);
    section(root, "classify", parse_classify, cfg.classify);
  }

  try {
    cfg.trap.validate();
    cfg.noise.model.validate();
    cfg.detection.model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  // Trial counts are per point (or per histogram) and must be positive for
  // the experiment that uses them.
  switch (experiment) {
    case Experiment::Rabi:
      require(cfg.rabi.trials > 0, "rabi.trials must be > 0");
      break;
    case Experiment::Entangle:
      require(cfg.entangle.phi || cfg.entangle.u0_volts,
              "entangle: give exactly one of phi_rad or u0_volts");
      require(cfg.entangle.trials > 0, "entangle.trials must be > 0");
      break;
    case Experiment::Rotate:
    case Experiment::Fidelity:
      if (cfg.rotate.source == RotateSource::Entangle)
        require(cfg.entangle.phi || cfg.entangle.u0_volts,
                "rotate.source entangle needs entangle.phi_rad or entangle.u0_volts");
      require(cfg.rotate.trials > 0, "rotate.trials must be > 0");
      break;
    case Experiment::Histograms:
      require(cfg.histograms.trials > 0, "histograms.trials must be > 0");
      break;
    case Experiment::Estimate:
      require(!cfg.estimate.observed.empty(), "estimate.observed is required");
      require(!cfg.estimate.references.empty(), "estimate.references is required");
      break;
    case Experiment::Classify:
      require(!cfg.classify.counts.empty() || !cfg.classify.histogram.empty(),
              "classify: give counts or histogram");
      require(cfg.classify.counts.empty() || cfg.classify.histogram.empty(),
              "classify: give counts or histogram, not both");
      break;
  }
  if (experiment == Experiment::Fidelity)
    require(cfg.rotate.source != RotateSource::Singlet && cfg.rotate.source != RotateSource::Triplet,
            "fidelity: rotate.source must be synthesized or entangle");

  json canonical = j;
  canonical.erase("output");  // the prefix only names files
  cfg.canonical = canonical.dump();
  return cfg;
}

RunConfig load_config(const std::string& path, Experiment experiment,
                      const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), experiment, overrides);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(cfg.canonical);
  feed(std::string("\n") + experiment_name(cfg.experiment) + "\n");
  feed(cfg.seed ? std::to_string(*cfg.seed) : "-");
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

AddressingProfile resolve_profile(const RunConfig& cfg) {
  const AddressingSpec& a = cfg.addressing;
  const double d = a.displacement ? *a.displacement
                                  : solve_displacement_for_ratio(cfg.trap, a.ratio.value_or(2.0));
  double omega_c = a.omega_c.value_or(0.0);
  if (a.rabi_1) {
    const AddressingProfile unit = addressing_profile(cfg.trap, d, 1.0, a.harmonic_order);
    if (!(unit.Omega_1 > 0.0))
      throw std::domain_error("addressing: ion 1 sits on a Bessel zero; give omega_c_khz instead");
    omega_c = *a.rabi_1 / unit.Omega_1;
  }
  return addressing_profile(cfg.trap, d, omega_c, a.harmonic_order);
}

AddressingProfile resolve_rsb_profile(const RunConfig& cfg) {
  if (!cfg.addressing.rsb_ratio) return resolve_profile(cfg);
  RunConfig copy = cfg;
  const AddressingProfile base = resolve_profile(cfg);
  copy.addressing.ratio = *cfg.addressing.rsb_ratio;
  copy.addressing.displacement.reset();
  copy.addressing.harmonic_order = 0;
  copy.addressing.rabi_1.reset();
  copy.addressing.omega_c = base.Omega_c;
  return resolve_profile(copy);
}

double resolve_phi(const RunConfig& cfg) {
  if (cfg.entangle.phi) return *cfg.entangle.phi;
  if (cfg.entangle.u0_volts) return phase_from_static_potential(cfg.trap, *cfg.entangle.u0_volts);
  throw ConfigError("entangle: give exactly one of phi_rad or u0_volts");
}

}  // namespace ionent
