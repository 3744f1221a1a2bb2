#include "levicav/linear_model.hpp"

#include <unsupported/Eigen/KroneckerProduct>

namespace levicav {

LinearModel build_linear_model(const SystemParams& sys) {
  LinearModel m;
  m.omega = sys.trap_freqs();
  m.coupling = sys.couplings();
  m.kappa = sys.cavity.linewidth;
  m.delta = sys.tweezer.detuning;
  m.gamma_gas = sys.gamma_gas();
  m.mass = sys.particle.mass();
  for (int i = 0; i < 3; ++i)
    m.n_gas[i] = kBoltzmann * sys.env.gas_temperature / (kHbar * m.omega[i]);

  Mat8& M = m.drift;
  M(kCavX, kCavX) = -m.kappa / 2.0;
  M(kCavX, kCavY) = m.delta;
  M(kCavY, kCavY) = -m.kappa / 2.0;
  M(kCavY, kCavX) = -m.delta;
  for (int i = 0; i < 3; ++i) {
    const int q = q_index(i), p = p_index(i);
    M(kCavY, q) = -2.0 * m.coupling[i];
    M(q, p) = m.omega[i];
    M(p, q) = -m.omega[i];
    M(p, p) = -m.gamma_gas;
    M(p, kCavX) = -2.0 * m.coupling[i];
  }

  // cavity vacuum input; mechanical diffusion = gas bath + displacement noise
  // sized so the cavity-free heating rate equals <Tdot_noise>
  Mat8& D = m.diffusion;
  D(kCavX, kCavX) = m.kappa / 2.0;
  D(kCavY, kCavY) = m.kappa / 2.0;
  const Vec3 tdot = sys.noise_heating();
  for (int i = 0; i < 3; ++i) {
    const double d_gas = 2.0 * m.gamma_gas * (m.n_gas[i] + 0.5);
    const double d_noise = 2.0 * kBoltzmann * tdot[i] / (kHbar * m.omega[i]);
    D(p_index(i), p_index(i)) = d_gas + d_noise;
  }
  return m;
}

Eigen::MatrixXd steady_state_covariance(const Eigen::MatrixXd& drift,
                                        const Eigen::MatrixXd& diffusion) {
  const Eigen::Index n = drift.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(drift, false);
  if (es.eigenvalues().real().maxCoeff() >= 0.0)
    throw instability_error(
        "steady_state_covariance: drift matrix has a non-decaying eigenvalue");

  // vec(M C + C M^T) = (I (x) M + M (x) I) vec(C)
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd lhs = Eigen::kroneckerProduct(id, drift).eval() +
                        Eigen::kroneckerProduct(drift, id).eval();
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(diffusion.data(), n * n);
  Eigen::VectorXd vec_c = lhs.partialPivLu().solve(rhs);
  Eigen::MatrixXd cov = Eigen::Map<Eigen::MatrixXd>(vec_c.data(), n, n);
  return 0.5 * (cov + cov.transpose());
}

double temperature_from_covariance(const Mat8& cov, int axis, double omega) {
  const double q2 = cov(q_index(axis), q_index(axis));
  const double p2 = cov(p_index(axis), p_index(axis));
  return kHbar * omega * 0.5 * (q2 + p2) / kBoltzmann;
}

double lyapunov_cooling_rate(const SystemParams& sys, int axis) {
  SystemParams clean = sys;
  clean.env.noise_heating_rate_ref = Vec3::Zero();
  const LinearModel model = build_linear_model(clean);
  const Mat8 cov = steady_state_covariance(model);
  const double t = temperature_from_covariance(cov, axis, model.omega[axis]);
  return model.gamma_gas * (clean.env.gas_temperature / t - 1.0);
}

double calibrate_g0_lyapunov(const SystemParams& sys, double gamma_target) {
  SystemParams probe = sys;
  probe.phase = PositionPhase::node();
  probe.coupling.g0 = calibrate_g0(gamma_target, sys.tweezer.detuning,
                                   sys.cavity.linewidth, sys.trap_freqs()[1]);
  for (int iter = 0; iter < 20; ++iter) {
    const double implied = lyapunov_cooling_rate(probe, 1);
    if (std::abs(implied - gamma_target) < 1e-6 * gamma_target) break;
    probe.coupling.g0 *= std::sqrt(gamma_target / implied);
  }
  return probe.coupling.g0;
}

double heating_trajectory(double t, double t_start, double gamma_gas, double t_gas,
                          double noise_heating) {
  if (gamma_gas <= 0.0) return t_start + noise_heating * t;
  const double t_eff = (gamma_gas * t_gas + noise_heating) / gamma_gas;
  return t_eff + (t_start - t_eff) * std::exp(-gamma_gas * t);
}

} // namespace levicav
