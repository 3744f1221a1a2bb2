#include "levicav/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace levicav {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kRequiredSections =
    "cavity, tweezer, particle, environment, coupling, sweep";

// consumes keys from one section and rejects whatever is left over
class SectionReader {
 public:
  SectionReader(const json& root, const std::string& name) : name_(name) {
    if (!root.contains(name))
      throw domain_error("config: missing section '" + name +
                         "'; required sections: " + kRequiredSections);
    section_ = &root.at(name);
    if (!section_->is_object())
      throw domain_error("config: section '" + name + "' must be a JSON object");
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const json& v = take(key);
    if (!v.is_number())
      throw domain_error("config: " + path(key) + " must be a number");
    return v.get<double>();
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (v <= 0.0) throw domain_error("config: " + path(key) + " must be > 0");
    return v;
  }

  double non_negative(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (v < 0.0) throw domain_error("config: " + path(key) + " must be >= 0");
    return v;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = take(key);
    if (!v.is_number_integer())
      throw domain_error("config: " + path(key) + " must be an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = take(key);
    if (!v.is_number_unsigned())
      throw domain_error("config: " + path(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = take(key);
    if (!v.is_string())
      throw domain_error("config: " + path(key) + " must be a string");
    return v.get<std::string>();
  }

  Vec3 vec3(const std::string& key, const Vec3& fallback) {
    if (!has(key)) return fallback;
    const json& v = take(key);
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); }))
      throw domain_error("config: " + path(key) + " must be an array of 3 numbers");
    return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  }

  std::vector<double> array(const std::string& key) {
    if (!has(key)) return {};
    const json& v = take(key);
    if (!v.is_array() ||
        !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); }))
      throw domain_error("config: " + path(key) + " must be an array of numbers");
    std::vector<double> out;
    for (const json& e : v) out.push_back(e.get<double>());
    return out;
  }

  void finish() const {
    for (auto it = section_->begin(); it != section_->end(); ++it)
      if (!consumed_.count(it.key()))
        throw domain_error("config: unknown key '" + path(it.key()) + "'");
  }

 private:
  bool has(const std::string& key) const { return section_->contains(key); }
  const json& take(const std::string& key) {
    consumed_.insert(key);
    return section_->at(key);
  }
  std::string path(const std::string& key) const { return name_ + "." + key; }

  const json* section_ = nullptr;
  std::string name_;
  std::set<std::string> consumed_;
};

RunConfig parse_json(const json& root) {
  if (!root.is_object())
    throw domain_error("config: top level must be a JSON object with sections: " +
                       std::string(kRequiredSections));
  for (auto it = root.begin(); it != root.end(); ++it) {
    static const std::set<std::string> sections{"cavity",      "tweezer",
                                               "particle",    "environment",
                                               "coupling",    "sweep"};
    if (!sections.count(it.key()))
      throw domain_error("config: unknown section '" + it.key() + "'");
  }

  RunConfig cfg;
  SystemParams& sys = cfg.system;

  {
    SectionReader s(root, "cavity");
    sys.cavity.wavelength = s.positive("wavelength_nm", 1550.0) * 1.0e-9;
    sys.cavity.length = s.positive("length_mm", 6.46) * 1.0e-3;
    // finesse defaults to the reference value unless only a linewidth is given
    sys.cavity.linewidth = hz_to_rad(s.non_negative("linewidth_hz", 0.0));
    sys.cavity.finesse =
        s.non_negative("finesse", sys.cavity.linewidth > 0.0 ? 0.0 : 22.0e3);
    sys.cavity.waist = s.positive("waist_um", 48.0) * 1.0e-6;
    sys.cavity.mirror_absorption = s.non_negative("mirror_absorption_ppm", 45.0) * 1.0e-6;
    sys.cavity.mirror_transmission =
        s.non_negative("mirror_transmission_ppm", 99.0) * 1.0e-6;
    sys.cavity.mirror_roc = s.positive("mirror_roc_mm", 10.0) * 1.0e-3;
    s.finish();
  }
  {
    SectionReader s(root, "tweezer");
    sys.tweezer.power = s.positive("power_w", 0.5);
    sys.tweezer.reference_power = s.positive("reference_power_w", 0.5);
    sys.tweezer.numerical_aperture = s.positive("numerical_aperture", 0.83);
    sys.tweezer.detuning = hz_to_rad(s.number("detuning_hz", 400.0e3));
    sys.tweezer.polarization_misalignment =
        s.non_negative("polarization_misalignment", 0.15);
    sys.tweezer.reference_trap_frequencies =
        hz_to_rad(1.0) *
        s.vec3("trap_frequencies_hz", Vec3(0.12e6, 0.14e6, 0.04e6));
    s.finish();
  }
  {
    SectionReader s(root, "particle");
    sys.particle.diameter = s.positive("diameter_nm", 136.0) * 1.0e-9;
    sys.particle.density = s.positive("density_kg_m3", 1850.0);
    s.finish();
  }
  {
    SectionReader s(root, "environment");
    sys.env.pressure = mbar_to_pa(s.non_negative("pressure_mbar", 3.0e-3));
    sys.env.gas_temperature = s.positive("gas_temperature_k", 300.0);
    sys.env.gas_molecular_mass =
        s.positive("gas_molar_mass_amu", 28.97) * kAtomicMassUnit;
    const Vec3 noise = s.vec3("noise_heating_k_per_s", Vec3(33.0, 33.0, 330.0));
    if ((noise.array() < 0.0).any())
      throw domain_error("config: environment.noise_heating_k_per_s must be >= 0");
    sys.env.noise_heating_rate_ref = noise;
    s.finish();
  }
  {
    SectionReader s(root, "coupling");
    sys.coupling.g0 = hz_to_rad(s.non_negative("g0_hz", 33.0e3));
    sys.coupling.rz_ratio = s.non_negative("rz_ratio", 1.0);
    sys.phase = PositionPhase(s.number("phase_rad", kPi / 2.0));
    s.finish();
  }
  {
    SectionReader s(root, "sweep");
    SweepSettings& sw = cfg.sweep;
    const std::string mode = s.text("mode", "oracle");
    if (mode == "oracle") {
      sw.mode = SimulationMode::Oracle;
    } else if (mode == "trajectory") {
      sw.mode = SimulationMode::Trajectory;
    } else if (mode == "nonlinear") {
      sw.mode = SimulationMode::Nonlinear;
    } else {
      throw domain_error(
          "config: sweep.mode must be oracle, trajectory or nonlinear");
    }
    sw.master_seed = s.unsigned_integer("master_seed", 1);
    sw.duration = s.positive("duration_s", 0.5);
    sw.dt = s.positive("dt_s", 1.0e-6);
    sw.ensemble_size = static_cast<int>(s.integer("ensemble_size", 1));
    sw.jobs = static_cast<int>(s.integer("jobs", 1));
    if (sw.ensemble_size < 1)
      throw domain_error("config: sweep.ensemble_size must be >= 1");
    if (sw.jobs < 1) throw domain_error("config: sweep.jobs must be >= 1");
    sw.pressure_grid = s.array("pressure_grid_mbar");
    for (double& p : sw.pressure_grid) {
      if (p <= 0.0)
        throw domain_error("config: sweep.pressure_grid_mbar must be > 0");
      p = mbar_to_pa(p);
    }
    sw.detuning_grid = s.array("detuning_grid_hz");
    for (double& d : sw.detuning_grid) d = hz_to_rad(d);
    sw.power_grid = s.array("power_grid_w");
    for (double p : sw.power_grid)
      if (p <= 0.0) throw domain_error("config: sweep.power_grid_w must be > 0");
    sw.phases = s.array("phases_rad");
    sw.power_sweep_pressure =
        mbar_to_pa(s.positive("power_sweep_pressure_mbar", 1.0e-5));
    sw.relaxation_duration = s.positive("relaxation_duration_s", 0.2);
    sw.relaxation_pre_duration = s.positive("relaxation_pre_duration_s", 0.02);
    sw.relaxation_ensemble = static_cast<int>(s.integer("relaxation_ensemble", 150));
    if (sw.relaxation_ensemble < 1)
      throw domain_error("config: sweep.relaxation_ensemble must be >= 1");
    sw.relaxation_window =
        static_cast<Eigen::Index>(s.integer("relaxation_window_samples", 256));
    sw.relaxation_hop =
        static_cast<Eigen::Index>(s.integer("relaxation_hop_samples", 64));
    sw.relaxation_band_halfwidth =
        s.positive("relaxation_band_halfwidth_hz", 8.0e3);
    sw.detuning_off = hz_to_rad(s.number("detuning_off_hz", 20.0e6));
    s.finish();
  }

  cfg.system.validate();
  return cfg;
}

json to_json(const RunConfig& cfg) {
  const SystemParams& sys = cfg.system;
  const SweepSettings& sw = cfg.sweep;
  json root;
  root["cavity"] = {
      {"wavelength_nm", sys.cavity.wavelength * 1.0e9},
      {"length_mm", sys.cavity.length * 1.0e3},
      {"finesse", sys.cavity.finesse},
      {"linewidth_hz", rad_to_hz(sys.cavity.linewidth)},
      {"waist_um", sys.cavity.waist * 1.0e6},
      {"mirror_absorption_ppm", sys.cavity.mirror_absorption * 1.0e6},
      {"mirror_transmission_ppm", sys.cavity.mirror_transmission * 1.0e6},
      {"mirror_roc_mm", sys.cavity.mirror_roc * 1.0e3},
  };
  root["tweezer"] = {
      {"power_w", sys.tweezer.power},
      {"reference_power_w", sys.tweezer.reference_power},
      {"numerical_aperture", sys.tweezer.numerical_aperture},
      {"detuning_hz", rad_to_hz(sys.tweezer.detuning)},
      {"polarization_misalignment", sys.tweezer.polarization_misalignment},
      {"trap_frequencies_hz",
       {rad_to_hz(sys.tweezer.reference_trap_frequencies[0]),
        rad_to_hz(sys.tweezer.reference_trap_frequencies[1]),
        rad_to_hz(sys.tweezer.reference_trap_frequencies[2])}},
  };
  root["particle"] = {
      {"diameter_nm", sys.particle.diameter * 1.0e9},
      {"density_kg_m3", sys.particle.density},
  };
  root["environment"] = {
      {"pressure_mbar", pa_to_mbar(sys.env.pressure)},
      {"gas_temperature_k", sys.env.gas_temperature},
      {"gas_molar_mass_amu", sys.env.gas_molecular_mass / kAtomicMassUnit},
      {"noise_heating_k_per_s",
       {sys.env.noise_heating_rate_ref[0], sys.env.noise_heating_rate_ref[1],
        sys.env.noise_heating_rate_ref[2]}},
  };
  root["coupling"] = {
      {"g0_hz", rad_to_hz(sys.coupling.g0)},
      {"rz_ratio", sys.coupling.rz_ratio},
      {"phase_rad", sys.phase.phi},
  };
  const char* mode = sw.mode == SimulationMode::Oracle       ? "oracle"
                     : sw.mode == SimulationMode::Trajectory ? "trajectory"
                                                             : "nonlinear";
  auto to_array = [](const std::vector<double>& v, double scale) {
    json a = json::array();
    for (double x : v) a.push_back(x * scale);
    return a;
  };
  root["sweep"] = {
      {"mode", mode},
      {"master_seed", sw.master_seed},
      {"duration_s", sw.duration},
      {"dt_s", sw.dt},
      {"ensemble_size", sw.ensemble_size},
      {"jobs", sw.jobs},
      {"pressure_grid_mbar", to_array(sw.pressure_grid, pa_to_mbar(1.0))},
      {"detuning_grid_hz", to_array(sw.detuning_grid, rad_to_hz(1.0))},
      {"power_grid_w", to_array(sw.power_grid, 1.0)},
      {"phases_rad", to_array(sw.phases, 1.0)},
      {"power_sweep_pressure_mbar", pa_to_mbar(sw.power_sweep_pressure)},
      {"relaxation_duration_s", sw.relaxation_duration},
      {"relaxation_pre_duration_s", sw.relaxation_pre_duration},
      {"relaxation_ensemble", sw.relaxation_ensemble},
      {"relaxation_window_samples", sw.relaxation_window},
      {"relaxation_hop_samples", sw.relaxation_hop},
      {"relaxation_band_halfwidth_hz", sw.relaxation_band_halfwidth},
      {"detuning_off_hz", rad_to_hz(sw.detuning_off)},
  };
  return root;
}

json parse_text_to_tree(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos)
    throw domain_error("config: empty file; required sections: " +
                       std::string(kRequiredSections));
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) throw domain_error("config: invalid JSON");
  return root;
}

void apply_override(json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw domain_error("config: override must look like section.key=value, got '" +
                       assignment + "'");
  const std::string key_path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);
  json value = json::parse(value_text, nullptr, false);
  if (value.is_discarded()) value = value_text;  // bare strings allowed

  json* node = &root;
  std::istringstream keys(key_path);
  std::string key;
  std::vector<std::string> parts;
  while (std::getline(keys, key, '.')) parts.push_back(key);
  if (parts.empty())
    throw domain_error("config: empty key in override '" + assignment + "'");
  try {
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = value;
  } catch (const json::exception&) {
    throw domain_error("config: cannot apply override '" + assignment + "'");
  }
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
  return parse_json(parse_text_to_tree(text));
}

RunConfig parse_config(const std::string& path,
                       const std::vector<std::string>& overrides) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw domain_error("config: cannot open " + path);
  std::ostringstream buffer;
  buffer << is.rdbuf();

  json tree = parse_text_to_tree(buffer.str());
  for (const std::string& o : overrides) apply_override(tree, o);

  // parse/serialize fixpoint: the manifest of a run reparses to the exact
  // floating-point parameters the run itself used
  std::string text = tree.dump(2) + "\n";
  RunConfig cfg = parse_json(tree);
  for (int i = 0; i < 8; ++i) {
    const std::string next = config_to_json(cfg);
    if (next == text) break;
    text = next;
    cfg = parse_config_text(next);
  }
  return cfg;
}

std::string config_to_json(const RunConfig& config) {
  return to_json(config).dump(2) + "\n";
}

SweepPlan pressure_plan_from_config(const RunConfig& config) {
  SweepPlan plan = default_pressure_plan(config.system);
  if (!config.sweep.pressure_grid.empty()) plan.grid = config.sweep.pressure_grid;
  if (!config.sweep.phases.empty()) plan.phases = config.sweep.phases;
  plan.mode = config.sweep.mode;
  plan.duration = config.sweep.duration;
  plan.dt = config.sweep.dt;
  plan.ensemble_size = config.sweep.ensemble_size;
  plan.master_seed = config.sweep.master_seed;
  plan.jobs = config.sweep.jobs;
  return plan;
}

SweepPlan detuning_plan_from_config(const RunConfig& config) {
  SweepPlan plan = default_detuning_plan(config.system);
  if (!config.sweep.detuning_grid.empty()) plan.grid = config.sweep.detuning_grid;
  if (!config.sweep.phases.empty()) plan.phases = config.sweep.phases;
  plan.mode = config.sweep.mode;
  plan.duration = config.sweep.duration;
  plan.dt = config.sweep.dt;
  plan.ensemble_size = config.sweep.ensemble_size;
  plan.master_seed = config.sweep.master_seed;
  plan.jobs = config.sweep.jobs;
  return plan;
}

SweepPlan power_plan_from_config(const RunConfig& config) {
  SweepPlan plan = default_power_plan(config.system);
  plan.base.env.pressure = config.sweep.power_sweep_pressure;
  if (!config.sweep.power_grid.empty()) plan.grid = config.sweep.power_grid;
  if (!config.sweep.phases.empty()) plan.phases = config.sweep.phases;
  plan.mode = config.sweep.mode;
  plan.duration = config.sweep.duration;
  plan.dt = config.sweep.dt;
  plan.ensemble_size = config.sweep.ensemble_size;
  plan.master_seed = config.sweep.master_seed;
  plan.jobs = config.sweep.jobs;
  return plan;
}

RelaxationPlan relaxation_plan_from_config(const RunConfig& config) {
  RelaxationPlan plan;
  plan.base = config.system;
  plan.detuning_off = config.sweep.detuning_off;
  plan.ensemble_size = config.sweep.relaxation_ensemble;
  plan.pre_duration = config.sweep.relaxation_pre_duration;
  plan.duration = config.sweep.relaxation_duration;
  plan.dt = config.sweep.dt;
  plan.window_samples = config.sweep.relaxation_window;
  plan.hop_samples = config.sweep.relaxation_hop;
  plan.band_halfwidth = config.sweep.relaxation_band_halfwidth;
  plan.master_seed = config.sweep.master_seed;
  plan.jobs = config.sweep.jobs;
  return plan;
}

} // namespace levicav
