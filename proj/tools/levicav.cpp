// command-line driver: parse a JSON config, dispatch a campaign, write the
// per-run output directory with CSV tables and a reproducibility manifest
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "levicav/config.hpp"
#include "levicav/experiments.hpp"
#include "levicav/linear_model.hpp"
#include "levicav/spectrum.hpp"

namespace fs = std::filesystem;
using namespace levicav;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInstability = 3;
constexpr int kExitAnalysis = 4;
constexpr int kExitIo = 5;

std::string timestamped_outdir(const std::string& label) {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  return (fs::path("runs") / (label + "-" + stamp)).string();
}

std::string resolve_outdir(const std::string& requested, const std::string& label) {
  return requested.empty() ? timestamped_outdir(label) : requested;
}

// LEVICAV_SEED overrides the config master seed before canonicalization
void apply_env_seed(std::vector<std::string>& overrides) {
  if (const char* seed = std::getenv("LEVICAV_SEED"))
    overrides.push_back(std::string("sweep.master_seed=") + seed);
}

RunConfig load_config(const std::string& path, std::vector<std::string> overrides,
                      int jobs) {
  apply_env_seed(overrides);
  if (jobs > 0) overrides.push_back("sweep.jobs=" + std::to_string(jobs));
  return parse_config(path, overrides);
}

double parse_phase(const std::string& text) {
  if (text == "node") return kPi / 2.0;
  if (text == "slope") return kPi / 4.0;
  if (text == "antinode") return 0.0;
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw domain_error("--phase must be node, slope, antinode or a value in rad");
  }
}

void run_steady_state(const RunConfig& cfg) {
  SystemParams sys = cfg.system;
  const LinearModel model = build_linear_model(sys);
  if (!model.stable() || !sys.stable())
    throw instability_error("steady-state: parameter point is a particle-loss point");
  const Vec3 temps =
      temperatures_from_covariance(steady_state_covariance(model), model.omega);
  std::printf("# phase = %.6g rad, pressure = %.6g mbar, detuning = %.6g Hz\n",
              sys.phase.phi, pa_to_mbar(sys.env.pressure),
              rad_to_hz(sys.tweezer.detuning));
  std::printf("axis,temperature_K,gamma_c_hz\n");
  for (int i = 0; i < 3; ++i)
    std::printf("%s,%.9g,%.9g\n", kAxisNames[i].c_str(), temps[i],
                rad_to_hz(lyapunov_cooling_rate(sys, i)));
}

void run_sweep_command(const RunConfig& cfg, const std::string& variable,
                       const std::string& outdir_flag) {
  SweepPlan plan;
  if (variable == "pressure") plan = pressure_plan_from_config(cfg);
  else if (variable == "detuning") plan = detuning_plan_from_config(cfg);
  else plan = power_plan_from_config(cfg);

  SweepResult result;
  if (variable == "pressure") result = run_pressure_sweep(plan);
  else if (variable == "detuning") result = run_detuning_sweep(plan);
  else result = run_power_sweep(plan);

  const std::string outdir = resolve_outdir(outdir_flag, "sweep-" + variable);
  emit_report(result, outdir, config_to_json(cfg));
  std::printf("%zu points -> %s\n", result.points.size(), outdir.c_str());
}

void run_relaxation(const RunConfig& cfg, const std::string& direction,
                    const std::string& outdir_flag) {
  const RelaxationPlan plan = relaxation_plan_from_config(cfg);
  const SwitchDirection dir =
      direction == "off" ? SwitchDirection::CoolingOff : SwitchDirection::CoolingOn;
  const RelaxationResult result = run_relaxation_ensemble(plan, dir);
  const std::string outdir = resolve_outdir(outdir_flag, "relaxation-" + direction);
  emit_report(result, outdir, config_to_json(cfg));
  std::printf("%d members, switch-%s -> %s\n", plan.ensemble_size, direction.c_str(),
              outdir.c_str());
}

void run_psd(const std::string& trace_path, const std::string& channel,
             Eigen::Index segment, double overlap, const std::string& outdir_flag) {
  const TimeTrace trace = load_trace(trace_path);
  int ch = 0;
  if (!channel.empty()) {
    try {
      ch = std::stoi(channel);
    } catch (const std::exception&) {
      ch = trace.channel(channel);
    }
  }
  if (segment <= 0) segment = std::min<Eigen::Index>(trace.n_samples(), 1 << 14);
  const Spectrum spectrum = welch_psd(trace, ch, segment, overlap);

  const std::string outdir = resolve_outdir(outdir_flag, "psd");
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw io_error("psd: cannot create directory " + outdir);
  export_spectrum_csv(spectrum, (fs::path(outdir) / "psd.csv").string());
  std::printf("%d segments, df = %.9g Hz, area = %.9g -> %s\n", spectrum.n_segments,
              spectrum.resolution_bandwidth, spectrum.area(), outdir.c_str());
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"levitated-nanoparticle cavity cooling simulator"};
  app.require_subcommand(1);

  std::string config_path = "configs/paper_defaults.json";
  std::vector<std::string> overrides;
  std::string outdir;
  int jobs = 0;

  auto add_common = [&](CLI::App* cmd, bool wants_config = true) {
    if (wants_config) {
      cmd->add_option("config", config_path, "JSON configuration file")
          ->capture_default_str();
      cmd->add_option("--set", overrides, "override a config key, e.g. "
                      "environment.pressure_mbar=1e-5");
      cmd->add_option("--jobs", jobs, "worker thread cap");
    }
    cmd->add_option("-o,--output", outdir,
                    "output directory (default: timestamped under runs/)");
  };

  CLI::App* steady = app.add_subcommand("steady-state",
                                        "print per-axis temperatures and cooling rates");
  std::string phase_text;
  add_common(steady);
  steady->add_option("--phase", phase_text, "node | slope | antinode | value in rad");

  for (const char* var : {"pressure", "detuning", "power"})
    add_common(app.add_subcommand(std::string("sweep-") + var,
                                  std::string("run the ") + var + " sweep campaign"));

  CLI::App* relax = app.add_subcommand("relaxation", "switch-on/off ensemble protocol");
  std::string direction = "on";
  add_common(relax);
  relax->add_option("--direction", direction, "on | off")
      ->check(CLI::IsMember({"on", "off"}));

  CLI::App* psd = app.add_subcommand("psd", "Welch spectrum of a recorded trace");
  std::string trace_path, channel;
  Eigen::Index segment = 0;
  double overlap = 0.5;
  psd->add_option("trace", trace_path, "binary trace file")->required();
  psd->add_option("--channel", channel, "channel index or label");
  psd->add_option("--segment", segment, "segment length in samples");
  psd->add_option("--overlap", overlap, "segment overlap fraction");
  add_common(psd, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (psd->parsed()) {
      run_psd(trace_path, channel, segment, overlap, outdir);
      return kExitOk;
    }
    RunConfig cfg = load_config(config_path, overrides, jobs);
    if (steady->parsed()) {
      if (!phase_text.empty()) cfg.system.phase = PositionPhase(parse_phase(phase_text));
      run_steady_state(cfg);
    } else if (relax->parsed()) {
      run_relaxation(cfg, direction, outdir);
    } else {
      const std::string name = app.get_subcommands().front()->get_name();
      run_sweep_command(cfg, name.substr(std::string("sweep-").size()), outdir);
    }
  } catch (const domain_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const instability_error& e) {
    std::fprintf(stderr, "instability: %s\n", e.what());
    return kExitInstability;
  } catch (const analysis_error& e) {
    std::fprintf(stderr, "analysis error: %s\n", e.what());
    return kExitAnalysis;
  } catch (const io_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  }
  return kExitOk;
}
