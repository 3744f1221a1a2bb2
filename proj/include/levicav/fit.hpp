#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "levicav/errors.hpp"

namespace levicav {

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd estimates;
  Eigen::VectorXd std_errors;
  double residual_norm = 0.0;  // sum of squared residuals
  bool converged = false;
  int iterations = 0;

  double operator[](const std::string& name) const;
};

struct LevmarOptions {
  int max_iterations = 200;
  double step_tolerance = 1e-9;
  double gradient_tolerance = 1e-12;
  double initial_damping = 1e-3;
};

// damped Gauss-Newton with a Levenberg damping schedule; residual and Jacobian
// are evaluated analytically by the caller
FitResult levmar(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
                 const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
                 Eigen::VectorXd x0, std::vector<std::string> names,
                 const LevmarOptions& opts = {});

// steady-state temperature from competing gas and cavity baths
double two_bath_temperature(double gamma_gas, double gamma_cavity, double t_gas,
                            double noise_heating);

// measured linewidth: nonlinear broadening in quadrature with the damping sum
double damping_model(double gamma_nl, double gamma_gas, double gamma_cavity);

// T(t) = T_inf + (T_0 - T_inf) exp(-rate t); rate kept positive by construction.
// Returns parameters named t0, t_inf, rate.
FitResult fit_bounded_exponential(const Eigen::VectorXd& time,
                                  const Eigen::VectorXd& temperature);

// one axis of the pressure sweep: joint log-space fit of the two-bath
// temperature curve and the damping curve. Pressures in Pa, rates in rad/s.
// Returns gamma_cavity, noise_heating, c_nl, gamma_gas_slope (rad/s per Pa).
FitResult fit_pressure_sweep(const Eigen::VectorXd& pressure,
                             const Eigen::VectorXd& temperature,
                             const Eigen::VectorXd& damping, double t_gas);

void export_fit_json(const FitResult& result, const std::string& path);

} // namespace levicav
