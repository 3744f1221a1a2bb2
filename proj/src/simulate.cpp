#include "levicav/simulate.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace levicav {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// symmetric square-root factor with eigenvalues clamped at zero
Mat8 psd_sqrt(const Mat8& m) {
  Eigen::SelfAdjointEigenSolver<Mat8> es(m);
  Vec8 lambda = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<std::string> channel_labels(bool record_cavity) {
  std::vector<std::string> labels;
  if (record_cavity) {
    labels = {"X", "Y"};
  }
  for (const auto& axis : kAxisNames) {
    labels.push_back("q_" + axis);
    labels.push_back("p_" + axis);
  }
  return labels;
}

void record_row(Eigen::MatrixXd& samples, Eigen::Index row, const Vec8& state,
                bool record_cavity) {
  if (record_cavity) {
    samples.row(row) = state.transpose();
  } else {
    samples.row(row) = state.tail<6>().transpose();
  }
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 1));
}

Vec8 sample_gaussian_state(const Mat8& cov, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Vec8 xi;
  for (int i = 0; i < 8; ++i) xi[i] = normal(rng);
  return psd_sqrt(cov) * xi;
}

void discretize(const LinearModel& model, double dt, Mat8& propagator,
                Mat8& noise_cov) {
  // Van Loan block construction: exp([[-M, D], [0, M^T]] dt) yields the
  // propagator and the exact discrete noise covariance
  Eigen::Matrix<double, 16, 16> block = Eigen::Matrix<double, 16, 16>::Zero();
  block.topLeftCorner<8, 8>() = -model.drift * dt;
  block.topRightCorner<8, 8>() = model.diffusion * dt;
  block.bottomRightCorner<8, 8>() = model.drift.transpose() * dt;
  Eigen::Matrix<double, 16, 16> e = block.exp();
  propagator = e.bottomRightCorner<8, 8>().transpose();
  noise_cov = propagator * e.topRightCorner<8, 8>();
  noise_cov = 0.5 * (noise_cov + noise_cov.transpose()).eval();
}

TimeTrace simulate(const LinearModel& model, const SimulateOptions& opt) {
  if (opt.dt <= 0.0) throw domain_error("simulate: dt must be positive");
  if (opt.duration < 100.0 * opt.dt)
    throw domain_error("simulate: duration must be at least 100 dt");
  if (opt.record_stride < 1)
    throw domain_error("simulate: record_stride must be >= 1");

  Mat8 propagator, noise_cov;
  discretize(model, opt.dt, propagator, noise_cov);
  const Mat8 noise_factor = psd_sqrt(noise_cov);

  const auto n = static_cast<Eigen::Index>(std::llround(opt.duration / opt.dt));
  const Eigen::Index stride = opt.record_stride;
  TimeTrace trace;
  trace.dt = opt.dt * static_cast<double>(stride);
  trace.seed = opt.seed;
  trace.labels = channel_labels(opt.record_cavity);
  trace.samples.resize((n + stride - 1) / stride,
                       static_cast<Eigen::Index>(trace.labels.size()));

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Vec8 state = opt.initial_state.value_or(Vec8::Zero());
  Vec8 xi;
  const double bound2 = opt.divergence_bound * opt.divergence_bound;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i % stride == 0)
      record_row(trace.samples, i / stride, state, opt.record_cavity);
    for (int k = 0; k < 8; ++k) xi[k] = normal(rng);
    state = propagator * state + noise_factor * xi;
    if (state.squaredNorm() > bound2)
      throw instability_error("simulate: state norm exceeded divergence bound");
  }
  return trace;
}

NonlinearTrapModel NonlinearTrapModel::from_system(const SystemParams& sys) {
  NonlinearTrapModel m;
  m.linear = build_linear_model(sys);
  // Gaussian-focus length scales from the tweezer NA
  const double w_t = sys.cavity.wavelength / (kPi * sys.tweezer.numerical_aperture);
  const double z_r = kPi * w_t * w_t / sys.cavity.wavelength;
  m.anharmonic_length = Vec3(w_t / 2.0, w_t / 2.0, z_r);
  return m;
}

TimeTrace simulate_nonlinear(const NonlinearTrapModel& model,
                             const SimulateOptions& opt) {
  const LinearModel& lin = model.linear;
  const double omega_max = lin.omega.maxCoeff();
  if (opt.dt <= 0.0 || opt.dt > 1.0 / (50.0 * omega_max))
    throw domain_error("simulate_nonlinear: require 0 < dt <= 1/(50 max Omega)");
  if (opt.duration < 100.0 * opt.dt)
    throw domain_error("simulate_nonlinear: duration must be at least 100 dt");
  if (opt.record_stride < 1)
    throw domain_error("simulate_nonlinear: record_stride must be >= 1");

  const double dt = opt.dt;
  const double kappa = lin.kappa, delta = lin.delta, gamma = lin.gamma_gas;
  const Vec3 xzp = lin.zero_point_length();

  // cavity substep: expm of the 2x2 cavity block and its exact noise
  const double decay = std::exp(-kappa * dt / 2.0);
  const double cth = std::cos(delta * dt), sth = std::sin(delta * dt);
  Eigen::Matrix2d cav_prop;
  cav_prop << decay * cth, decay * sth, -decay * sth, decay * cth;
  Eigen::Matrix2d cav_gen;
  cav_gen << -kappa / 2.0, delta, -delta, -kappa / 2.0;
  const Eigen::Matrix2d cav_drive =
      cav_gen.inverse() * (cav_prop - Eigen::Matrix2d::Identity());
  const double cav_noise_std = std::sqrt((1.0 - decay * decay) / 2.0);

  // mechanical OU half-step coefficients per axis
  const double c1 = std::exp(-gamma * dt / 2.0);
  Vec3 ou_std;
  for (int i = 0; i < 3; ++i) {
    const double dpp = lin.diffusion(p_index(i), p_index(i));
    ou_std[i] = gamma > 0.0 ? std::sqrt(dpp * (1.0 - c1 * c1) / (2.0 * gamma))
                            : std::sqrt(dpp * dt / 2.0);
  }

  auto force = [&](int i, double q) {
    const double len = model.anharmonic_length[i];
    if (len <= 0.0) return -lin.omega[i] * q;
    const double u = q * xzp[i] / len;
    return -lin.omega[i] * q * std::exp(-u * u);
  };

  const auto n = static_cast<Eigen::Index>(std::llround(opt.duration / opt.dt));
  const Eigen::Index stride = opt.record_stride;
  TimeTrace trace;
  trace.dt = dt * static_cast<double>(stride);
  trace.seed = opt.seed;
  trace.labels = channel_labels(opt.record_cavity);
  trace.samples.resize((n + stride - 1) / stride,
                       static_cast<Eigen::Index>(trace.labels.size()));

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal;
  Vec8 state = opt.initial_state.value_or(Vec8::Zero());
  const double bound2 = opt.divergence_bound * opt.divergence_bound;
  for (Eigen::Index step = 0; step < n; ++step) {
    if (step % stride == 0)
      record_row(trace.samples, step / stride, state, opt.record_cavity);
    // O-B half, A drift
    for (int i = 0; i < 3; ++i) {
      double& q = state[q_index(i)];
      double& p = state[p_index(i)];
      p = c1 * p + ou_std[i] * normal(rng);
      p += 0.5 * dt * (force(i, q) - 2.0 * lin.coupling[i] * state[kCavX]);
      q += dt * lin.omega[i] * p;
    }
    // cavity: exact linear update with the source held constant over the step
    double source_y = 0.0;
    for (int i = 0; i < 3; ++i) source_y -= 2.0 * lin.coupling[i] * state[q_index(i)];
    Eigen::Vector2d cav(state[kCavX], state[kCavY]);
    cav = cav_prop * cav + cav_drive * Eigen::Vector2d(0.0, source_y);
    cav[0] += cav_noise_std * normal(rng);
    cav[1] += cav_noise_std * normal(rng);
    state[kCavX] = cav[0];
    state[kCavY] = cav[1];
    // B-O half
    for (int i = 0; i < 3; ++i) {
      double& q = state[q_index(i)];
      double& p = state[p_index(i)];
      p += 0.5 * dt * (force(i, q) - 2.0 * lin.coupling[i] * state[kCavX]);
      p = c1 * p + ou_std[i] * normal(rng);
    }
    if (state.squaredNorm() > bound2)
      throw instability_error("simulate_nonlinear: state norm exceeded divergence bound");
  }
  return trace;
}

} // namespace levicav
