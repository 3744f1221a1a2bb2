#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "levicav/experiments.hpp"
#include "levicav/fit.hpp"

using namespace levicav;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

const SweepPoint& point_at(const SweepResult& result, double phase, double value) {
  for (const SweepPoint& pt : result.points)
    if (pt.phase == phase && pt.value == value) return pt;
  throw std::logic_error("no such sweep point");
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  return std::string(std::istreambuf_iterator<char>(is), {});
}

} // namespace

TEST_CASE("oracle pressure sweep reproduces the position ordering") {
  const SweepPlan plan = default_pressure_plan(SystemParams::paper_defaults());
  const SweepResult result = run_pressure_sweep(plan);
  REQUIRE(result.points.size() == 3 * 22);

  for (double p : plan.grid) {
    const SweepPoint& node = point_at(result, kPi / 2.0, p);
    const SweepPoint& slope = point_at(result, kPi / 4.0, p);
    const SweepPoint& anti = point_at(result, 0.0, p);
    REQUIRE(node.stable);
    if (p <= mbar_to_pa(1.0e-2)) {
      // argmin over phase: y likes the node, z the antinode, x (eps > 0) the node
      CHECK(node.temperature[1] < slope.temperature[1]);
      CHECK(node.temperature[1] < anti.temperature[1]);
      CHECK(anti.temperature[2] < node.temperature[2]);
      CHECK(anti.temperature[2] < slope.temperature[2]);
      CHECK(node.temperature[0] < anti.temperature[0]);
    }
  }

  // gas-dominated limit at the top of the grid: the constant cavity rate is
  // swamped by gas damping, so T approaches 300 K and gamma approaches the
  // linear-in-pressure gas rate
  const double p_top = plan.grid.back();
  const SweepPoint& hot = point_at(result, kPi / 2.0, p_top);
  const double gamma_top = plan.base.gamma_gas() * p_top / plan.base.env.pressure;
  for (int i = 0; i < 3; ++i) {
    CHECK(rel_err(hot.temperature[i], 300.0) < 0.12);
    CHECK(rel_err(hot.damping[i], gamma_top) < 0.15);
  }

  // millikelvin regime along the cavity axis at low pressure
  const SweepPoint& cold = point_at(result, kPi / 2.0, mbar_to_pa(1.0e-5));
  CHECK(cold.temperature[1] > 1.0e-3);
  CHECK(cold.temperature[1] < 10.0e-3);
}

TEST_CASE("trajectory mode matches the oracle") {
  SweepPlan plan = default_pressure_plan(SystemParams::paper_defaults());
  plan.grid = {mbar_to_pa(0.1), mbar_to_pa(1.0), mbar_to_pa(10.0), mbar_to_pa(100.0)};
  plan.phases = {kPi / 2.0};
  plan.mode = SimulationMode::Trajectory;
  plan.duration = 5.0;
  plan.dt = 4.0e-6;
  plan.master_seed = 2024;
  const SweepResult traj = run_pressure_sweep(plan);

  plan.mode = SimulationMode::Oracle;
  const SweepResult oracle = run_pressure_sweep(plan);
  for (std::size_t k = 0; k < traj.points.size(); ++k) {
    REQUIRE(traj.points[k].stable);
    for (int i = 0; i < 3; ++i)
      CHECK(rel_err(traj.points[k].temperature[i],
                    oracle.points[k].temperature[i]) < 0.05);
  }
}

TEST_CASE("detuning sweep marks unstable points and finds the optimum") {
  // coupling calibrated so the loss boundary sits just above 300 kHz: the
  // smallest grid detuning is lost and the optimum lands on 400 kHz
  SystemParams sys = SystemParams::paper_defaults();
  sys.coupling.g0 =
      calibrate_g0_loss_boundary(hz_to_rad(330.0e3), sys.trap_freqs().minCoeff());
  // enough gas that the residual 20 MHz cooling rate is negligible
  sys.env.pressure = mbar_to_pa(0.05);
  SweepPlan plan = default_detuning_plan(sys);
  plan.phases = {kPi / 2.0};  // the node, where the y coupling is full strength
  const SweepResult result = run_detuning_sweep(plan);

  double best = 1.0e18;
  double best_delta = 0.0;
  for (const SweepPoint& pt : result.points) {
    if (pt.value == hz_to_rad(0.3e6)) {
      CHECK_FALSE(pt.stable);
      continue;
    }
    REQUIRE(pt.stable);
    if (pt.phase == kPi / 2.0 && pt.temperature[1] < best) {
      best = pt.temperature[1];
      best_delta = pt.value;
    }
  }
  CHECK(best_delta == doctest::Approx(hz_to_rad(400.0e3)));

  // at 20 MHz the cavity has no effect
  SystemParams free = sys;
  free.coupling.g0 = 0.0;
  const Vec3 t_free = temperatures_from_covariance(
      steady_state_covariance(build_linear_model(free)), build_linear_model(free).omega);
  const SweepPoint& far = point_at(result, kPi / 2.0, hz_to_rad(20.0e6));
  for (int i = 0; i < 3; ++i) CHECK(rel_err(far.temperature[i], t_free[i]) < 0.05);

  // an overdriven coupling destabilizes the soft axis at small detunings
  SweepPlan hot = plan;
  hot.base.coupling.g0 = hz_to_rad(120.0e3);
  hot.phases = {0.0};  // antinode couples z
  const SweepResult flagged = run_detuning_sweep(hot);
  int unstable = 0;
  for (const SweepPoint& pt : flagged.points) {
    if (!pt.stable) {
      ++unstable;
      CHECK(std::isnan(pt.temperature[1]));
      CHECK(pt.value < hz_to_rad(2.0e6));
    }
  }
  CHECK(unstable >= 2);
  CHECK(point_at(flagged, 0.0, hz_to_rad(20.0e6)).stable);
}

TEST_CASE("red detuning with strong coupling is flagged as loss") {
  SweepPlan plan = default_detuning_plan(SystemParams::paper_defaults());
  plan.grid = {hz_to_rad(-400.0e3)};
  plan.phases = {0.0};
  plan.base.coupling.g0 = hz_to_rad(120.0e3);
  const SweepResult result = run_detuning_sweep(plan);
  REQUIRE(result.points.size() == 1);
  CHECK_FALSE(result.points[0].stable);
  CHECK(std::isnan(result.points[0].temperature[1]));
}

TEST_CASE("power sweep cools harder at higher power unless noise saturates") {
  SystemParams sys = SystemParams::paper_defaults();
  sys.env.noise_heating_rate_ref = Vec3::Zero();
  SweepPlan quiet = default_power_plan(sys);
  const SweepResult no_noise = run_power_sweep(quiet);
  const double t_lo = point_at(no_noise, kPi / 2.0, quiet.grid.front()).temperature[1];
  const double t_hi = point_at(no_noise, kPi / 2.0, quiet.grid.back()).temperature[1];
  CHECK(t_hi < t_lo);

  const SweepPlan noisy = default_power_plan(SystemParams::paper_defaults());
  const SweepResult result = run_power_sweep(noisy);
  auto t_y = [&](std::size_t i) {
    return point_at(result, kPi / 2.0, noisy.grid[i]).temperature[1];
  };
  const double early = (t_y(0) - t_y(2)) / t_y(0);     // 0.24 -> 0.28 W
  const double late = (t_y(11) - t_y(13)) / t_y(11);   // 0.46 -> 0.50 W
  CHECK(late < 0.5 * early);  // flattening near full power
}

TEST_CASE("sweep plan validation") {
  SweepPlan plan = default_pressure_plan(SystemParams::paper_defaults());
  plan.grid = {2.0, 1.0, 3.0};
  CHECK_THROWS_AS(run_pressure_sweep(plan), domain_error);
  plan.grid = {1.0e-3, 1.0e-2};  // two decades only
  CHECK_THROWS_AS(run_pressure_sweep(plan), domain_error);
  plan = default_pressure_plan(SystemParams::paper_defaults());
  plan.ensemble_size = 0;
  CHECK_THROWS_AS(run_pressure_sweep(plan), domain_error);
  plan = default_pressure_plan(SystemParams::paper_defaults());
  plan.variable = "power";
  CHECK_THROWS_AS(run_pressure_sweep(plan), domain_error);
}

TEST_CASE("relaxation ensemble baseline, cooling and reheating") {
  RelaxationPlan plan;
  plan.base = SystemParams::paper_defaults();
  plan.base.coupling.g0 = calibrate_g0_lyapunov(plan.base, hz_to_rad(1.3e3));
  plan.ensemble_size = 60;
  plan.pre_duration = 0.03;
  plan.duration = 0.06;
  plan.hop_samples = 64;
  plan.master_seed = 99;

  const RelaxationResult on = run_relaxation_ensemble(plan, SwitchDirection::CoolingOn);
  const TemperatureSeries& y = on.axis[1];
  REQUIRE(y.time.size() > 50);
  CHECK(y.time[0] < 0.0);
  CHECK(y.time[y.time.size() - 1] > 0.05);

  // t < 0 baseline sits at the gas temperature, no cavity effect
  double pre_mean = 0.0;
  int pre_count = 0;
  double post_mean = 0.0;
  int post_count = 0;
  for (Eigen::Index k = 0; k < y.time.size(); ++k) {
    if (y.time[k] < -2.0e-3) {
      pre_mean += y.temperature[k];
      ++pre_count;
    }
    if (y.time[k] > 0.02) {
      post_mean += y.temperature[k];
      ++post_count;
    }
  }
  REQUIRE(pre_count > 10);
  REQUIRE(post_count > 10);
  pre_mean /= pre_count;
  post_mean /= post_count;
  CHECK(rel_err(pre_mean, 300.0) < 0.3);
  CHECK(post_mean < 5.0);  // cooled by orders of magnitude

  // switch-on rate within a factor of five of gamma_c
  const double gamma_c = lyapunov_cooling_rate(plan.base, 1);
  Eigen::Index first = 0;
  while (first < y.time.size() && y.time[first] < 2.0e-4) ++first;
  Eigen::Index last = first;
  while (last < y.time.size() && y.time[last] < 0.03) ++last;
  const FitResult fit = fit_bounded_exponential(
      y.time.segment(first, last - first), y.temperature.segment(first, last - first));
  CHECK(fit.converged);
  CHECK(fit["rate"] > gamma_c / 5.0);
  CHECK(fit["rate"] < gamma_c * 5.0);

  // reheating after switch-off runs at the gas collision rate
  RelaxationPlan off_plan = plan;
  off_plan.duration = 0.2;
  off_plan.window_samples = 2048;
  off_plan.hop_samples = 512;
  const RelaxationResult off =
      run_relaxation_ensemble(off_plan, SwitchDirection::CoolingOff);
  const TemperatureSeries& yoff = off.axis[1];
  Eigen::Index start = 0;
  while (start < yoff.time.size() && yoff.time[start] < 2.0e-3) ++start;
  const FitResult reheat = fit_bounded_exponential(
      yoff.time.segment(start, yoff.time.size() - start),
      yoff.temperature.segment(start, yoff.time.size() - start));
  CHECK(reheat.converged);
  CHECK(rel_err(reheat["rate"], plan.base.gamma_gas()) < 0.3);
  // cold start, warm finish
  CHECK(yoff.temperature[start] < 30.0);
  CHECK(yoff.temperature[yoff.temperature.size() - 1] > 100.0);
}

TEST_CASE("reports are deterministic and degenerate grids are harmless") {
  namespace fs = std::filesystem;
  const fs::path dir_a = "report_a";
  const fs::path dir_b = "report_b";

  SweepPlan plan = default_pressure_plan(SystemParams::paper_defaults());
  plan.master_seed = 5;
  const SweepResult result = run_pressure_sweep(plan);
  emit_report(result, dir_a.string(), "{\"note\": 1}\n");
  const SweepResult again = run_pressure_sweep(plan);
  emit_report(again, dir_b.string());

  const std::string csv_a = slurp(dir_a / "pressure_sweep_temperatures.csv");
  CHECK(csv_a.rfind("pressure_mbar,phase_rad,axis,temperature_K\n", 0) == 0);
  CHECK(csv_a == slurp(dir_b / "pressure_sweep_temperatures.csv"));
  CHECK(slurp(dir_a / "pressure_sweep_damping.csv") == slurp(dir_b / "pressure_sweep_damping.csv"));
  CHECK(slurp(dir_a / "manifest.json") == "{\"note\": 1}\n");
  CHECK_FALSE(fs::exists(dir_b / "manifest.json"));

  // empty grid: header-only CSV, no error
  plan.grid.clear();
  const SweepResult empty = run_pressure_sweep(plan);
  emit_report(empty, dir_a.string());
  CHECK(slurp(dir_a / "pressure_sweep_temperatures.csv") ==
        "pressure_mbar,phase_rad,axis,temperature_K\n");

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("parallel execution yields the same result as serial") {
  SweepPlan plan = default_detuning_plan(SystemParams::paper_defaults());
  plan.jobs = 4;
  const SweepResult par = run_detuning_sweep(plan);
  plan.jobs = 1;
  const SweepResult ser = run_detuning_sweep(plan);
  REQUIRE(par.points.size() == ser.points.size());
  for (std::size_t k = 0; k < par.points.size(); ++k) {
    CHECK(par.points[k].temperature == ser.points[k].temperature);
    CHECK(par.points[k].seed == ser.points[k].seed);
  }
}
