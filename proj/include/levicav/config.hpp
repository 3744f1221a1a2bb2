#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "levicav/experiments.hpp"

namespace levicav {

// sweep/ensemble settings shared by all subcommands; stored in SI units,
// the config file uses Hz / mbar / W / nm
struct SweepSettings {
  SimulationMode mode = SimulationMode::Oracle;
  std::uint64_t master_seed = 1;
  double duration = 0.5;                 // s, per grid point
  double dt = 1.0e-6;                    // s
  int ensemble_size = 1;
  int jobs = 1;
  std::vector<double> pressure_grid;     // Pa; empty = default grid
  std::vector<double> detuning_grid;     // rad/s
  std::vector<double> power_grid;        // W
  std::vector<double> phases;            // rad
  double power_sweep_pressure = mbar_to_pa(1.0e-5);  // Pa

  double relaxation_duration = 0.2;      // s after the switch
  double relaxation_pre_duration = 0.02; // s of baseline
  int relaxation_ensemble = 150;
  Eigen::Index relaxation_window = 256;  // samples (per-axis floor)
  Eigen::Index relaxation_hop = 64;
  double relaxation_band_halfwidth = 8.0e3;  // Hz
  double detuning_off = hz_to_rad(20.0e6);   // rad/s
};

struct RunConfig {
  SystemParams system;
  SweepSettings sweep;
};

// strict-schema parse: unknown keys are rejected by name, domain violations
// name the offending key and its unit
RunConfig parse_config_text(const std::string& text);

// load + apply --set style dotted overrides ("environment.pressure_mbar=1e-5"),
// then iterate parse/serialize to a fixpoint so that a run and its manifest
// rerun see bit-identical parameters
RunConfig parse_config(const std::string& path,
                       const std::vector<std::string>& overrides = {});

// full round-trippable serialization (every key explicit, file units)
std::string config_to_json(const RunConfig& config);

// plan builders used by the CLI subcommands
SweepPlan pressure_plan_from_config(const RunConfig& config);
SweepPlan detuning_plan_from_config(const RunConfig& config);
SweepPlan power_plan_from_config(const RunConfig& config);
RelaxationPlan relaxation_plan_from_config(const RunConfig& config);

} // namespace levicav
