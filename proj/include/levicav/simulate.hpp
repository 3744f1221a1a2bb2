#pragma once

#include <cstdint>
#include <optional>
#include <random>

#include "levicav/linear_model.hpp"
#include "levicav/time_trace.hpp"

namespace levicav {

struct SimulateOptions {
  double duration = 0.1;       // s
  double dt = 0.2e-6;          // s, 5 MHz default output rate
  std::uint64_t seed = 1;
  bool record_cavity = false;
  int record_stride = 1;       // keep every k-th integrator step
  double divergence_bound = 1.0e6;  // zero-point units, "particle loss"
  std::optional<Vec8> initial_state;
};

// deterministic seed stream derivation for ensembles
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// draws a zero-mean Gaussian state with the given covariance
Vec8 sample_gaussian_state(const Mat8& cov, std::mt19937_64& rng);

// exact one-step discretization of the linear SDE: state propagated by
// expm(M dt), noise injected with the exact per-step covariance
TimeTrace simulate(const LinearModel& model, const SimulateOptions& opt);

// one-step propagator and discrete noise covariance (Van Loan construction)
void discretize(const LinearModel& model, double dt, Mat8& propagator,
                Mat8& noise_cov);

// Gaussian-trap softening: restoring force -Omega q exp(-(q x_zp / L)^2)
struct NonlinearTrapModel {
  LinearModel linear;
  Vec3 anharmonic_length = Vec3::Zero();  // m, per axis

  static NonlinearTrapModel from_system(const SystemParams& sys);
};

// stochastic leapfrog with exact cavity and OU damping substeps;
// requires dt <= 1 / (50 max Omega)
TimeTrace simulate_nonlinear(const NonlinearTrapModel& model,
                             const SimulateOptions& opt);

} // namespace levicav
