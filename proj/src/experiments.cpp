#include "levicav/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include "levicav/simulate.hpp"

namespace levicav {

namespace {

namespace fs = std::filesystem;

// run fn(i) for i in [0, n), fanned out over at most jobs threads; exceptions
// are rethrown on the calling thread
void parallel_for(Eigen::Index n, int jobs, const std::function<void(Eigen::Index)>& fn) {
  const int workers = static_cast<int>(std::min<Eigen::Index>(std::max(jobs, 1), n));
  if (workers <= 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (Eigen::Index i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void check_monotone(const std::vector<double>& grid, const std::string& what) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const bool up = grid[1] > grid[0];
    if ((up && grid[i] <= grid[i - 1]) || (!up && grid[i] >= grid[i - 1]))
      throw domain_error(what + ": grid must be strictly monotone");
  }
}

Vec3 trace_temperatures(const TimeTrace& trace, const LinearModel& model) {
  Vec3 t;
  for (int i = 0; i < 3; ++i) {
    const auto q = trace.samples.col(trace.channel("q_" + kAxisNames[i]));
    const auto p = trace.samples.col(trace.channel("p_" + kAxisNames[i]));
    const double var_q = (q.array() - q.mean()).square().mean();
    const double var_p = (p.array() - p.mean()).square().mean();
    t[i] = kHbar * model.omega[i] * 0.5 * (var_q + var_p) / kBoltzmann;
  }
  return t;
}

Eigen::Index pow2_at_most(Eigen::Index n) {
  Eigen::Index p = 1;
  while (2 * p <= n) p *= 2;
  return p;
}

void evaluate_point(const SweepPlan& plan, const SystemParams& sys, SweepPoint& pt) {
  const LinearModel model = build_linear_model(sys);
  // a point survives only if the drift eigenvalues decay and the sharp
  // loss criterion g^2 < |Delta| Omega_min holds; the latter reproduces the
  // observed particle loss at small detunings, which the eigenvalues of the
  // linearized model alone do not capture
  pt.stable = model.stable() && sys.stable();
  if (!pt.stable) return;

  // damping from the closed-form rates; near the stability threshold the
  // sharp criterion can reject a point the eigenvalues accept, in which case
  // no rate is reported
  for (int i = 0; i < 3; ++i) {
    try {
      pt.damping[i] = model.gamma_gas +
                      cavity_cooling_rate(model.coupling[i], model.delta,
                                          model.kappa, model.omega[i]);
    } catch (const instability_error&) {
    }
  }

  if (plan.mode == SimulationMode::Oracle) {
    pt.temperature = temperatures_from_covariance(steady_state_covariance(model),
                                                  model.omega);
    return;
  }

  const Mat8 cov = steady_state_covariance(model);
  Vec3 sum = Vec3::Zero();
  TimeTrace last_trace;
  for (int member = 0; member < plan.ensemble_size; ++member) {
    SimulateOptions opt;
    opt.duration = plan.duration;
    opt.seed = derive_seed(pt.seed, static_cast<std::uint64_t>(member));
    std::mt19937_64 init_rng(derive_seed(opt.seed, 0));
    opt.initial_state = sample_gaussian_state(cov, init_rng);
    TimeTrace trace;
    if (plan.mode == SimulationMode::Trajectory) {
      opt.dt = plan.dt;
      trace = simulate(model, opt);
    } else {
      const NonlinearTrapModel nl = NonlinearTrapModel::from_system(sys);
      opt.dt = 1.0 / (55.0 * model.omega.maxCoeff());
      opt.record_stride =
          std::max(1, static_cast<int>(std::floor(plan.dt / opt.dt)));
      trace = simulate_nonlinear(nl, opt);
    }
    sum += trace_temperatures(trace, model);
    if (member + 1 == plan.ensemble_size) last_trace = std::move(trace);
  }
  pt.temperature = sum / static_cast<double>(plan.ensemble_size);

  if (plan.mode == SimulationMode::Nonlinear) {
    // linewidths straight off the simulated spectra
    const Eigen::Index segment =
        std::min<Eigen::Index>(pow2_at_most(last_trace.n_samples() / 4), 1 << 16);
    for (int i = 0; i < 3; ++i) {
      try {
        const Spectrum spec =
            welch_psd(last_trace, last_trace.channel("q_" + kAxisNames[i]), segment);
        pt.damping[i] = fwhm_damping(spec);
      } catch (const analysis_error&) {
        pt.damping[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
}

SweepResult run_sweep(const SweepPlan& plan,
                      const std::function<void(SystemParams&, double)>& apply) {
  plan.validate();
  SweepResult result;
  result.plan = plan;
  result.points.resize(plan.phases.size() * plan.grid.size());
  for (std::size_t pi = 0; pi < plan.phases.size(); ++pi) {
    for (std::size_t gi = 0; gi < plan.grid.size(); ++gi) {
      SweepPoint& pt = result.points[pi * plan.grid.size() + gi];
      pt.phase = plan.phases[pi];
      pt.value = plan.grid[gi];
      pt.seed = derive_seed(plan.master_seed,
                            static_cast<std::uint64_t>(pi * plan.grid.size() + gi));
    }
  }
  parallel_for(static_cast<Eigen::Index>(result.points.size()), plan.jobs,
               [&](Eigen::Index i) {
                 SweepPoint& pt = result.points[static_cast<std::size_t>(i)];
                 SystemParams sys = plan.base;
                 sys.phase = PositionPhase(pt.phase);
                 apply(sys, pt.value);
                 sys.validate();
                 evaluate_point(plan, sys, pt);
               });
  return result;
}

std::FILE* open_csv(const fs::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw io_error("emit_report: cannot open " + path.string());
  return f;
}

void write_sweep_csv(const SweepResult& result, const fs::path& path,
                     const char* value_column, double to_file_units,
                     bool temperature, bool stable_column) {
  std::FILE* f = open_csv(path);
  std::fprintf(f, "%s,phase_rad,axis,%s%s\n", value_column,
               temperature ? "temperature_K" : "damping_rad_per_s",
               stable_column ? ",stable" : "");
  for (const SweepPoint& pt : result.points) {
    for (int i = 0; i < 3; ++i) {
      const double v = temperature ? pt.temperature[i] : pt.damping[i];
      std::fprintf(f, "%.9g,%.9g,%s,", pt.value * to_file_units, pt.phase,
                   kAxisNames[i].c_str());
      if (pt.stable && std::isfinite(v)) std::fprintf(f, "%.9g", v);
      if (stable_column) std::fprintf(f, ",%d", pt.stable ? 1 : 0);
      std::fputc('\n', f);
    }
  }
  std::fclose(f);
}

void write_manifest(const std::string& manifest_json, const fs::path& outdir) {
  if (manifest_json.empty()) return;
  std::ofstream os(outdir / "manifest.json", std::ios::binary);
  if (!os) throw io_error("emit_report: cannot open " + (outdir / "manifest.json").string());
  os << manifest_json;
}

} // namespace

void SweepPlan::validate() const {
  if (variable != "pressure" && variable != "detuning" && variable != "power")
    throw domain_error("SweepPlan: variable must be pressure, detuning or power");
  check_monotone(grid, "SweepPlan");
  if (phases.empty()) throw domain_error("SweepPlan: need at least one phase");
  if (ensemble_size < 1) throw domain_error("SweepPlan: ensemble_size must be >= 1");
  if (jobs < 1) throw domain_error("SweepPlan: jobs must be >= 1");
  if (dt <= 0.0 || duration < 100.0 * dt)
    throw domain_error("SweepPlan: need dt > 0 and duration >= 100 dt");
}

SweepResult run_pressure_sweep(const SweepPlan& plan) {
  if (plan.variable != "pressure")
    throw domain_error("run_pressure_sweep: plan.variable must be 'pressure'");
  if (!plan.grid.empty()) {
    const auto [lo, hi] = std::minmax_element(plan.grid.begin(), plan.grid.end());
    if (*hi / *lo < 1.0e3)
      throw domain_error("run_pressure_sweep: grid must span >= 3 decades");
  }
  return run_sweep(plan, [](SystemParams& sys, double p) { sys.env.pressure = p; });
}

SweepResult run_detuning_sweep(const SweepPlan& plan) {
  if (plan.variable != "detuning")
    throw domain_error("run_detuning_sweep: plan.variable must be 'detuning'");
  return run_sweep(plan,
                   [](SystemParams& sys, double d) { sys.tweezer.detuning = d; });
}

SweepResult run_power_sweep(const SweepPlan& plan) {
  if (plan.variable != "power")
    throw domain_error("run_power_sweep: plan.variable must be 'power'");
  return run_sweep(plan, [](SystemParams& sys, double p) { sys.tweezer.power = p; });
}

SweepPlan default_pressure_plan(SystemParams base) {
  SweepPlan plan;
  plan.variable = "pressure";
  plan.base = std::move(base);
  for (int i = 0; i <= 21; ++i)  // 1e-6 .. 1e1 mbar, three points per decade
    plan.grid.push_back(mbar_to_pa(std::pow(10.0, -6.0 + i / 3.0)));
  return plan;
}

SweepPlan default_detuning_plan(SystemParams base) {
  SweepPlan plan;
  plan.variable = "detuning";
  plan.base = std::move(base);
  for (double mhz : {0.3, 0.4, 0.6, 1.0, 2.0, 5.0, 10.0, 20.0})
    plan.grid.push_back(hz_to_rad(mhz * 1.0e6));
  return plan;
}

SweepPlan default_power_plan(SystemParams base) {
  SweepPlan plan;
  plan.variable = "power";
  base.env.pressure = mbar_to_pa(1.0e-5);  // gas-free enough to see saturation
  plan.base = std::move(base);
  plan.phases = {kPi / 2.0, 0.0};  // best cooling: node for x/y, antinode for z
  for (int i = 0; i <= 13; ++i) plan.grid.push_back(0.24 + 0.02 * i);
  return plan;
}

void RelaxationPlan::validate() const {
  if (ensemble_size < 1) throw domain_error("RelaxationPlan: ensemble_size must be >= 1");
  if (jobs < 1) throw domain_error("RelaxationPlan: jobs must be >= 1");
  if (dt <= 0.0 || duration < 100.0 * dt || pre_duration < 100.0 * dt)
    throw domain_error("RelaxationPlan: need dt > 0 and durations >= 100 dt");
  if (window_samples < 8 || hop_samples < 1)
    throw domain_error("RelaxationPlan: need window >= 8 and hop >= 1 samples");
  if (band_halfwidth <= 0.0)
    throw domain_error("RelaxationPlan: band halfwidth must be positive");
  if (detuning_off == 0.0)
    throw domain_error("RelaxationPlan: detuning_off must be nonzero");
}

RelaxationResult run_relaxation_ensemble(const RelaxationPlan& plan,
                                         SwitchDirection direction) {
  plan.validate();
  SystemParams cooling = plan.base;
  cooling.validate();
  SystemParams off = cooling;
  off.tweezer.detuning = plan.detuning_off;

  const bool turning_on = direction == SwitchDirection::CoolingOn;
  const LinearModel pre = build_linear_model(turning_on ? off : cooling);
  const LinearModel post = build_linear_model(turning_on ? cooling : off);
  if (!pre.stable() || !post.stable())
    throw instability_error("run_relaxation_ensemble: configuration is unstable");
  const Mat8 cov0 = steady_state_covariance(pre);

  const auto n_pre = static_cast<Eigen::Index>(std::llround(plan.pre_duration / plan.dt));
  const auto n_post = static_cast<Eigen::Index>(std::llround(plan.duration / plan.dt));

  // per-axis window: at least the plan floor and at least 20 trap periods
  std::array<Eigen::Index, 3> window;
  std::array<double, 3> halfwidth;
  for (int i = 0; i < 3; ++i) {
    const auto periods = static_cast<Eigen::Index>(
        std::ceil(20.5 * kTwoPi / (post.omega[i] * plan.dt)));
    window[i] = std::max(plan.window_samples, periods);
    halfwidth[i] = std::max(plan.band_halfwidth,
                            3.0 / (static_cast<double>(window[i]) * plan.dt));
  }

  std::array<Eigen::MatrixXd, 3> member_temps;
  std::array<Eigen::VectorXd, 3> times;
  for (int i = 0; i < 3; ++i) {
    if (window[i] > n_pre + n_post - 1)
      throw domain_error("run_relaxation_ensemble: durations too short for the "
                         "sliding window");
    const Eigen::Index n_windows =
        (n_pre + n_post - 1 - window[i]) / plan.hop_samples + 1;
    member_temps[i].resize(plan.ensemble_size, n_windows);
  }

  parallel_for(plan.ensemble_size, plan.jobs, [&](Eigen::Index m) {
    const auto base_seed = derive_seed(plan.master_seed, static_cast<std::uint64_t>(m));
    std::mt19937_64 init_rng(derive_seed(base_seed, 0));

    SimulateOptions opt;
    opt.dt = plan.dt;
    opt.record_cavity = true;
    opt.duration = plan.pre_duration;
    opt.seed = derive_seed(base_seed, 1);
    opt.initial_state = sample_gaussian_state(cov0, init_rng);
    const TimeTrace head = simulate(pre, opt);

    opt.duration = plan.duration;
    opt.seed = derive_seed(base_seed, 2);
    opt.initial_state = Vec8(head.samples.row(n_pre - 1).transpose());
    const TimeTrace tail = simulate(post, opt);

    TimeTrace stitched;
    stitched.dt = plan.dt;
    stitched.labels = head.labels;
    stitched.samples.resize(n_pre + n_post - 1, head.samples.cols());
    stitched.samples.topRows(n_pre) = head.samples;
    stitched.samples.bottomRows(n_post - 1) = tail.samples.bottomRows(n_post - 1);

    for (int i = 0; i < 3; ++i) {
      const TemperatureSeries series = sliding_temperature(
          stitched, stitched.channel("q_" + kAxisNames[i]), window[i],
          plan.hop_samples, rad_to_hz(post.omega[i]), halfwidth[i],
          SignalUnits::Quadrature, post.mass, post.omega[i]);
      member_temps[i].row(m) = series.temperature.transpose();
      if (m == 0)  // switch at t = 0
        times[i] =
            (series.time.array() - plan.dt * static_cast<double>(n_pre - 1)).matrix();
    }
  });

  RelaxationResult result;
  result.plan = plan;
  result.direction = direction;
  for (int i = 0; i < 3; ++i) {
    result.axis[i].time = times[i];
    result.axis[i].temperature = member_temps[i].colwise().mean().transpose();
  }
  return result;
}

void emit_report(const SweepResult& result, const std::string& outdir,
                 const std::string& manifest_json) {
  const fs::path dir(outdir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("emit_report: cannot create directory " + outdir);

  const std::string& var = result.plan.variable;
  if (var == "pressure") {
    write_sweep_csv(result, dir / "pressure_sweep_temperatures.csv", "pressure_mbar",
                    pa_to_mbar(1.0), true, false);
    write_sweep_csv(result, dir / "pressure_sweep_damping.csv", "pressure_mbar",
                    pa_to_mbar(1.0), false, false);
  } else if (var == "detuning") {
    write_sweep_csv(result, dir / "detuning_sweep.csv", "detuning_hz",
                    rad_to_hz(1.0), true, true);
  } else {
    write_sweep_csv(result, dir / "power_sweep.csv", "power_w", 1.0, true, false);
  }
  write_manifest(manifest_json, dir);
}

void emit_report(const RelaxationResult& result, const std::string& outdir,
                 const std::string& manifest_json) {
  const fs::path dir(outdir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("emit_report: cannot create directory " + outdir);

  const bool on = result.direction == SwitchDirection::CoolingOn;
  std::FILE* f = open_csv(dir / (on ? "relaxation_on.csv"
                                    : "relaxation_off.csv"));
  std::fprintf(f, "time_s,axis,temperature_K\n");
  for (int i = 0; i < 3; ++i) {
    const TemperatureSeries& s = result.axis[i];
    for (Eigen::Index k = 0; k < s.time.size(); ++k)
      std::fprintf(f, "%.9g,%s,%.9g\n", s.time[k], kAxisNames[i].c_str(),
                   s.temperature[k]);
  }
  std::fclose(f);
  write_manifest(manifest_json, dir);
}

} // namespace levicav
