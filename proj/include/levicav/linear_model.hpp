#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "levicav/params.hpp"

namespace levicav {

using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;

// state layout: (X, Y, q_x, p_x, q_y, p_y, q_z, p_z); cavity quadratures first,
// mechanics in zero-point units
enum StateIndex : int {
  kCavX = 0,
  kCavY = 1,
  kQx = 2,
  kPx = 3,
  kQy = 4,
  kPy = 5,
  kQz = 6,
  kPz = 7,
};

inline int q_index(int axis) { return 2 + 2 * axis; }
inline int p_index(int axis) { return 3 + 2 * axis; }

struct LinearModel {
  Mat8 drift = Mat8::Zero();      // M, 1/s
  Mat8 diffusion = Mat8::Zero();  // D, symmetric PSD, 1/s

  // parameters carried along for analysis and unit conversion
  Vec3 omega = Vec3::Zero();      // trap frequencies, rad/s
  Vec3 coupling = Vec3::Zero();   // g_i, rad/s
  double kappa = 0.0;
  double delta = 0.0;
  double gamma_gas = 0.0;
  double mass = 0.0;              // kg
  Vec3 n_gas = Vec3::Zero();      // thermal occupation of the gas bath

  // zero-point length per axis, x_zp = sqrt(hbar / (2 m Omega))
  Vec3 zero_point_length() const {
    Vec3 r;
    for (int i = 0; i < 3; ++i) r[i] = std::sqrt(kHbar / (2.0 * mass * omega[i]));
    return r;
  }

  // meters per unit of the dimensionless q quadrature: x = sqrt(2) x_zp q,
  // so that <x^2> = k_B T / (m Omega^2) in the classical limit
  Vec3 displacement_scale() const { return std::sqrt(2.0) * zero_point_length(); }

  double max_real_eigenvalue() const {
    Eigen::EigenSolver<Mat8> es(drift, false);
    return es.eigenvalues().real().maxCoeff();
  }
  bool stable() const { return max_real_eigenvalue() < 0.0; }
};

LinearModel build_linear_model(const SystemParams& sys);

// solves M C + C M^T + D = 0; throws instability_error for non-decaying drift
Eigen::MatrixXd steady_state_covariance(const Eigen::MatrixXd& drift,
                                        const Eigen::MatrixXd& diffusion);
inline Mat8 steady_state_covariance(const LinearModel& model) {
  return steady_state_covariance(Eigen::MatrixXd(model.drift),
                                 Eigen::MatrixXd(model.diffusion));
}

// T_i = hbar Omega_i (<q_i^2> + <p_i^2>) / (2 k_B)
double temperature_from_covariance(const Mat8& cov, int axis, double omega);

inline Vec3 temperatures_from_covariance(const Mat8& cov, const Vec3& omega) {
  Vec3 t;
  for (int i = 0; i < 3; ++i) t[i] = temperature_from_covariance(cov, i, omega[i]);
  return t;
}

// effective per-axis cooling rate implied by the steady state,
// gamma_c = gamma_gas (T_gas / T_i - 1), with the noise heating removed
double lyapunov_cooling_rate(const SystemParams& sys, int axis);

// refines the closed-form g0 calibration so the Lyapunov-implied y cooling
// rate at the node hits gamma_target
double calibrate_g0_lyapunov(const SystemParams& sys, double gamma_target);

// closed-form reheating law; gamma_gas = 0 degenerates to linear growth
double heating_trajectory(double t, double t_start, double gamma_gas, double t_gas,
                          double noise_heating);

} // namespace levicav
