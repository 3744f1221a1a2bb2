#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "levicav/linear_model.hpp"
#include "levicav/spectrum.hpp"

namespace levicav {

enum class SimulationMode { Oracle, Trajectory, Nonlinear };

// one virtual measurement campaign: a grid of the swept variable crossed with
// a set of standing-wave positions
struct SweepPlan {
  std::string variable;                       // pressure | detuning | power
  std::vector<double> grid;                   // SI units: Pa, rad/s, or W
  std::vector<double> phases{kPi / 2.0, kPi / 4.0, 0.0};
  SystemParams base;
  SimulationMode mode = SimulationMode::Oracle;
  double duration = 0.5;                      // s, per point (trajectory modes)
  double dt = 1.0e-6;                         // s
  int ensemble_size = 1;
  std::uint64_t master_seed = 1;
  int jobs = 1;

  void validate() const;
};

struct SweepPoint {
  double value = 0.0;   // grid value, SI units
  double phase = 0.0;   // rad
  bool stable = false;
  Vec3 temperature = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  Vec3 damping = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  std::uint64_t seed = 0;
};

struct SweepResult {
  SweepPlan plan;
  std::vector<SweepPoint> points;  // phase-major, grid-minor order
};

SweepResult run_pressure_sweep(const SweepPlan& plan);
SweepResult run_detuning_sweep(const SweepPlan& plan);
SweepResult run_power_sweep(const SweepPlan& plan);

// desk-scale default campaigns built around a base parameter set
SweepPlan default_pressure_plan(SystemParams base);  // 1e-6..10 mbar, 3/decade
SweepPlan default_detuning_plan(SystemParams base);  // 0.3..20 MHz
SweepPlan default_power_plan(SystemParams base);     // 0.24..0.5 W at 1e-5 mbar

enum class SwitchDirection { CoolingOn, CoolingOff };

// switch-on/off protocol: the detuning jumps between detuning_off and the
// base value at t = 0; the drift matrix changes, the state is continuous
struct RelaxationPlan {
  SystemParams base;                          // the cooling configuration
  double detuning_off = hz_to_rad(20.0e6);    // rad/s, cavity effectively off
  int ensemble_size = 150;
  double pre_duration = 0.02;                 // s of t < 0 baseline
  double duration = 0.2;                      // s after the switch
  double dt = 1.0e-6;                         // s
  Eigen::Index window_samples = 4096;         // per-axis floor, see below
  Eigen::Index hop_samples = 1024;
  double band_halfwidth = 8.0e3;              // Hz around each trap frequency
  std::uint64_t master_seed = 1;
  int jobs = 1;

  void validate() const;
};

struct RelaxationResult {
  // ensemble-averaged sliding-window temperature per axis; time is relative
  // to the switch, so the t < 0 part is the pre-switch baseline
  std::array<TemperatureSeries, 3> axis;
  RelaxationPlan plan;
  SwitchDirection direction = SwitchDirection::CoolingOn;
};

RelaxationResult run_relaxation_ensemble(const RelaxationPlan& plan,
                                         SwitchDirection direction);

// CSV tables per campaign; when manifest_json is non-empty it is written
// verbatim to <outdir>/manifest.json so the run can be reproduced exactly
void emit_report(const SweepResult& result, const std::string& outdir,
                 const std::string& manifest_json = "");
void emit_report(const RelaxationResult& result, const std::string& outdir,
                 const std::string& manifest_json = "");

} // namespace levicav
