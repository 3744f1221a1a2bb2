#include "levicav/fit.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace levicav {

double FitResult::operator[](const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return estimates[static_cast<Eigen::Index>(i)];
  throw domain_error("FitResult: no parameter named '" + name + "'");
}

FitResult levmar(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
                 const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
                 Eigen::VectorXd x0, std::vector<std::string> names,
                 const LevmarOptions& opts) {
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = residual(x);
  double cost = r.squaredNorm();
  double lambda = opts.initial_damping;

  FitResult result;
  result.names = std::move(names);
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    const Eigen::MatrixXd jac = jacobian(x);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.norm() < opts.gradient_tolerance) {
      result.converged = true;
      break;
    }
    bool stepped = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      const Eigen::VectorXd x_new = x + step;
      const Eigen::VectorXd r_new = residual(x_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new <= cost) {
        const double rel_step = step.norm() / (x.norm() + 1e-300);
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda * 0.3, 1e-14);
        stepped = true;
        if (rel_step < opts.step_tolerance) result.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped || result.converged) {
      result.converged = result.converged || !stepped;
      // a failed line search with a tiny gradient still counts as converged
      if (!stepped && grad.norm() > 1e-6 * (1.0 + cost)) result.converged = false;
      break;
    }
  }
  result.iterations = iter;
  result.estimates = x;
  result.residual_norm = cost;

  // asymptotic standard errors from the Gauss-Newton Hessian
  const Eigen::MatrixXd jac = jacobian(x);
  const Eigen::Index n = r.size(), p = x.size();
  const double sigma2 = n > p ? cost / static_cast<double>(n - p) : 0.0;
  const Eigen::MatrixXd cov =
      sigma2 * (jac.transpose() * jac)
                   .completeOrthogonalDecomposition()
                   .pseudoInverse();
  result.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  return result;
}

double two_bath_temperature(double gamma_gas, double gamma_cavity, double t_gas,
                            double noise_heating) {
  if (gamma_gas + gamma_cavity <= 0.0)
    throw domain_error("two_bath_temperature: need gamma_gas + gamma_c > 0");
  return (gamma_gas * t_gas + noise_heating) / (gamma_gas + gamma_cavity);
}

double damping_model(double gamma_nl, double gamma_gas, double gamma_cavity) {
  if (gamma_nl < 0.0 || gamma_gas < 0.0 || gamma_cavity < 0.0)
    throw domain_error("damping_model: rates must be >= 0");
  return std::hypot(gamma_nl, gamma_gas + gamma_cavity);
}

FitResult fit_bounded_exponential(const Eigen::VectorXd& time,
                                  const Eigen::VectorXd& temperature) {
  const Eigen::Index n = time.size();
  if (n < 10 || temperature.size() != n)
    throw analysis_error("fit_bounded_exponential: need >= 10 matched points");
  const double spread = temperature.maxCoeff() - temperature.minCoeff();
  if (spread <= 1e-12 * std::abs(temperature.mean()))
    throw analysis_error("fit_bounded_exponential: constant series, rate unidentifiable");

  const double span = time[n - 1] - time[0];
  // parameters: (T_0, T_inf, log rate)
  Eigen::VectorXd x0(3);
  x0 << temperature[0], temperature[n - 1], std::log(3.0 / span);

  auto model = [&](const Eigen::VectorXd& x, Eigen::Index i) {
    const double rate = std::exp(x[2]);
    return x[1] + (x[0] - x[1]) * std::exp(-rate * (time[i] - time[0]));
  };
  auto residual = [&, n](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) r[i] = model(x, i) - temperature[i];
    return r;
  };
  auto jacobian = [&, n](const Eigen::VectorXd& x) {
    Eigen::MatrixXd jac(n, 3);
    const double rate = std::exp(x[2]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = time[i] - time[0];
      const double e = std::exp(-rate * t);
      jac(i, 0) = e;
      jac(i, 1) = 1.0 - e;
      jac(i, 2) = (x[0] - x[1]) * (-rate * t) * e;
    }
    return jac;
  };

  FitResult result = levmar(residual, jacobian, x0, {"t0", "t_inf", "log_rate"});
  // report the rate itself, with the delta-method standard error
  result.names = {"t0", "t_inf", "rate"};
  const double rate = std::exp(result.estimates[2]);
  result.std_errors[2] *= rate;
  result.estimates[2] = rate;
  return result;
}

FitResult fit_pressure_sweep(const Eigen::VectorXd& pressure,
                             const Eigen::VectorXd& temperature,
                             const Eigen::VectorXd& damping, double t_gas) {
  const Eigen::Index n = pressure.size();
  if (n < 6 || temperature.size() != n || damping.size() != n)
    throw analysis_error("fit_pressure_sweep: need >= 6 matched pressure points");
  if (pressure.minCoeff() <= 0.0)
    throw domain_error("fit_pressure_sweep: pressures must be positive");
  if (pressure.maxCoeff() / pressure.minCoeff() < 1.0e3)
    throw analysis_error("fit_pressure_sweep: pressure range must span >= 3 decades");

  // parameters (all log-space): gamma_c, noise_heating, c_nl, gamma_gas slope
  struct Terms {
    double a, num, den, t, u, v, s;
  };
  auto eval = [&](const Eigen::VectorXd& x, Eigen::Index i) {
    Terms w{};
    const double gc = std::exp(x[0]), tn = std::exp(x[1]);
    const double cnl = std::exp(x[2]), kg = std::exp(x[3]);
    w.a = kg * pressure[i];
    w.num = w.a * t_gas + tn;
    w.den = w.a + gc;
    w.t = w.num / w.den;
    w.u = cnl * w.t;
    w.v = w.den;
    w.s = w.u * w.u + w.v * w.v;
    return w;
  };
  auto residual = [&, n](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(2 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Terms w = eval(x, i);
      r[i] = std::log(w.t) - std::log(temperature[i]);
      r[n + i] = 0.5 * std::log(w.s) - std::log(damping[i]);
    }
    return r;
  };
  auto jacobian = [&, n](const Eigen::VectorXd& x) {
    Eigen::MatrixXd jac(2 * n, 4);
    const double gc = std::exp(x[0]), tn = std::exp(x[1]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Terms w = eval(x, i);
      const double dt_dgc = -gc / w.den;
      const double dt_dtn = tn / w.num;
      const double dt_dkg = w.a * t_gas / w.num - w.a / w.den;
      jac(i, 0) = dt_dgc;
      jac(i, 1) = dt_dtn;
      jac(i, 2) = 0.0;
      jac(i, 3) = dt_dkg;
      const double u2 = w.u * w.u;
      jac(n + i, 0) = (u2 * dt_dgc + w.v * gc) / w.s;
      jac(n + i, 1) = u2 * dt_dtn / w.s;
      jac(n + i, 2) = u2 / w.s;
      jac(n + i, 3) = (u2 * dt_dkg + w.v * w.a) / w.s;
    }
    return jac;
  };

  // seeds: gamma_c from the low-pressure damping floor, slope from the
  // high-pressure end, noise from the low-pressure temperature
  Eigen::Index lo, hi;
  pressure.minCoeff(&lo);
  pressure.maxCoeff(&hi);
  const double gc0 = std::max(damping[lo], 1e-6);
  const double kg0 = std::max(damping[hi] / pressure[hi], 1e-12);
  const double tn0 =
      std::max(temperature[lo] * gc0 - kg0 * pressure[lo] * t_gas, 1e-6);
  const double cnl0 = std::max(0.1 * gc0 / std::max(temperature[lo], 1e-6), 1e-9);
  Eigen::VectorXd x0(4);
  x0 << std::log(gc0), std::log(tn0), std::log(cnl0), std::log(kg0);

  FitResult result = levmar(residual, jacobian, x0,
                            {"gamma_cavity", "noise_heating", "c_nl", "gamma_gas_slope"},
                            LevmarOptions{400, 1e-12, 1e-14, 1e-3});
  for (Eigen::Index k = 0; k < 4; ++k) {
    const double v = std::exp(result.estimates[k]);
    result.std_errors[k] *= v;
    result.estimates[k] = v;
  }
  return result;
}

void export_fit_json(const FitResult& result, const std::string& path) {
  nlohmann::json j;
  for (std::size_t i = 0; i < result.names.size(); ++i) {
    j["parameters"][result.names[i]] = {
        {"estimate", result.estimates[static_cast<Eigen::Index>(i)]},
        {"std_error", result.std_errors[static_cast<Eigen::Index>(i)]}};
  }
  j["residual_norm"] = result.residual_norm;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  std::ofstream os(path);
  if (!os) throw io_error("export_fit_json: cannot open " + path);
  os << j.dump(2) << "\n";
}

} // namespace levicav
