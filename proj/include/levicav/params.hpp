#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "levicav/constants.hpp"
#include "levicav/errors.hpp"

namespace levicav {

using Vec3 = Eigen::Vector3d;

// cavity linewidth from finesse, kappa = pi c / (F L)
inline double linewidth_from_finesse(double finesse, double length) {
  if (finesse <= 1.0 || length <= 0.0)
    throw domain_error("linewidth_from_finesse: require F > 1 and L > 0");
  return kPi * kSpeedOfLight / (finesse * length);
}

inline double finesse_from_linewidth(double kappa, double length) {
  if (kappa <= 0.0 || length <= 0.0)
    throw domain_error("finesse_from_linewidth: require kappa > 0 and L > 0");
  return kPi * kSpeedOfLight / (kappa * length);
}

// Purcell factor eta = 6 F lambda^2 / (pi^3 w0^2)
inline double purcell_factor(double finesse, double wavelength, double waist) {
  if (finesse <= 0.0 || wavelength <= 0.0 || waist <= 0.0)
    throw domain_error("purcell_factor: all arguments must be positive");
  return 6.0 * finesse * wavelength * wavelength / (kPi * kPi * kPi * waist * waist);
}

// fraction of scattered power entering the cavity, f = eta / (eta + 1)
inline double scattered_fraction(double eta) {
  if (eta < 0.0) throw domain_error("scattered_fraction: eta must be >= 0");
  return eta / (eta + 1.0);
}

inline double particle_mass(double diameter, double density) {
  if (diameter <= 0.0 || density <= 0.0)
    throw domain_error("particle_mass: diameter and density must be positive");
  return density * kPi * diameter * diameter * diameter / 6.0;
}

// bad-cavity sideband cooling floor, nbar = kappa / (4 Omega)
inline double min_phonon_number(double kappa, double omega) {
  if (omega <= 0.0) throw domain_error("min_phonon_number: Omega must be positive");
  return kappa / (4.0 * omega);
}

struct CavityParams {
  double wavelength = 1550.0e-9;   // m
  double length = 6.46e-3;         // m
  double finesse = 22.0e3;
  double waist = 48.0e-6;          // m
  double linewidth = 0.0;          // rad/s, derived from finesse when zero
  double mirror_absorption = 45e-6;
  double mirror_transmission = 99e-6;
  double mirror_roc = 10.0e-3;     // m, informational only

  // derives whichever of {linewidth, finesse} was left zero and checks consistency
  void validate() {
    if (length <= 0.0 || waist <= 0.0 || wavelength <= 0.0)
      throw domain_error("CavityParams: lengths must be positive");
    if (linewidth <= 0.0 && finesse > 1.0) {
      linewidth = linewidth_from_finesse(finesse, length);
    } else if (finesse <= 1.0 && linewidth > 0.0) {
      finesse = finesse_from_linewidth(linewidth, length);
    }
    if (finesse <= 1.0 || linewidth <= 0.0)
      throw domain_error("CavityParams: require finesse > 1 and linewidth > 0");
    const double kappa_ref = linewidth_from_finesse(finesse, length);
    if (std::abs(linewidth - kappa_ref) / linewidth >= 1e-6)
      throw domain_error("CavityParams: kappa, finesse and length are inconsistent");
  }
};

struct TweezerParams {
  double power = 0.5;              // W
  double reference_power = 0.5;    // W
  double numerical_aperture = 0.83;
  double detuning = hz_to_rad(400.0e3);      // rad/s, Delta = omega_c - omega_L
  double polarization_misalignment = 0.15;   // epsilon
  Vec3 reference_trap_frequencies{hz_to_rad(0.12e6), hz_to_rad(0.14e6),
                                  hz_to_rad(0.04e6)}; // rad/s at reference_power

  void validate() const {
    if (power <= 0.0 || reference_power <= 0.0)
      throw domain_error("TweezerParams: powers must be positive");
    if (numerical_aperture <= 0.0 || numerical_aperture >= 1.0)
      throw domain_error("TweezerParams: NA must lie in (0, 1)");
    if (polarization_misalignment < 0.0 || polarization_misalignment >= 1.0)
      throw domain_error("TweezerParams: misalignment must lie in [0, 1)");
    if ((reference_trap_frequencies.array() <= 0.0).any())
      throw domain_error("TweezerParams: reference trap frequencies must be positive");
  }
};

struct ParticleParams {
  double diameter = 136.0e-9;  // m
  double density = 1850.0;     // kg/m^3, Stoeber silica
  double mass() const { return particle_mass(diameter, density); }

  void validate() const {
    if (diameter <= 0.0 || density <= 0.0)
      throw domain_error("ParticleParams: diameter and density must be positive");
  }
};

struct EnvironmentParams {
  double pressure = mbar_to_pa(3.0e-3);  // Pa
  double gas_temperature = 300.0;        // K
  double gas_molecular_mass = 28.97 * kAtomicMassUnit; // kg, air
  Vec3 noise_heating_rate_ref{33.0, 33.0, 330.0};      // K/s at reference power

  void validate() const {
    if (pressure < 0.0) throw domain_error("EnvironmentParams: pressure must be >= 0");
    if (gas_temperature <= 0.0)
      throw domain_error("EnvironmentParams: gas temperature must be positive");
    if (gas_molecular_mass <= 0.0)
      throw domain_error("EnvironmentParams: gas molecular mass must be positive");
    if ((noise_heating_rate_ref.array() < 0.0).any())
      throw domain_error("EnvironmentParams: noise heating rates must be >= 0");
  }
};

// phase of the equilibrium position in the standing wave: pi/2 at node, 0 at antinode
struct PositionPhase {
  double phi = kPi / 2.0;

  PositionPhase() = default;
  explicit PositionPhase(double phase) : phi(canonical(phase)) {}

  static double canonical(double phase) {
    double p = std::fmod(phase, kPi);
    if (p < 0.0) p += kPi;
    return p;
  }
  static PositionPhase node() { return PositionPhase(kPi / 2.0); }
  static PositionPhase slope() { return PositionPhase(kPi / 4.0); }
  static PositionPhase antinode() { return PositionPhase(0.0); }
};

struct CouplingParams {
  double g0 = hz_to_rad(33.0e3);  // rad/s, calibration knob
  double rz_ratio = 1.0;          // z-coupling scale relative to g0

  void validate() const {
    if (g0 < 0.0 || rz_ratio < 0.0)
      throw domain_error("CouplingParams: g0 and rz_ratio must be >= 0");
  }
};

// trap frequencies scale as sqrt(P)
inline Vec3 trap_frequencies(double power, const TweezerParams& tweezer) {
  if (power <= 0.0) throw domain_error("trap_frequencies: power must be positive");
  return tweezer.reference_trap_frequencies *
         std::sqrt(power / tweezer.reference_power);
}

// Epstein free-molecular drag on a sphere, linear in pressure
inline double gas_damping(const EnvironmentParams& env, const ParticleParams& particle) {
  env.validate();
  const double r = particle.diameter / 2.0;
  const double vbar = std::sqrt(8.0 * kBoltzmann * env.gas_temperature /
                                (kPi * env.gas_molecular_mass));
  return 15.8 * r * r * env.pressure / (particle.mass() * vbar);
}

// per-axis couplings: (eps g0 sin phi, g0 sin phi, rz g0 cos phi) * sqrt(P/Pref)
inline Vec3 coupling_rates(double g0, double phi, double epsilon, double rz_ratio,
                           double power, double reference_power) {
  if (g0 < 0.0) throw domain_error("coupling_rates: g0 must be >= 0");
  const double scale = std::sqrt(power / reference_power);
  const double s = std::sin(phi);
  const double c = std::cos(phi);
  return Vec3(epsilon * g0 * s, g0 * s, rz_ratio * g0 * c) * scale;
}

// sharp loss criterion g^2 >= |Delta| Omega (sharp boundary), checked against the
// smallest trap frequency
inline bool is_dynamically_stable(double g, double delta, double omega) {
  if (omega <= 0.0) throw domain_error("is_dynamically_stable: Omega must be positive");
  return g == 0.0 || g * g < std::abs(delta) * omega;
}

inline bool is_dynamically_stable(const Vec3& g, double delta, const Vec3& omega) {
  const double omega_min = omega.minCoeff();
  for (int i = 0; i < 3; ++i)
    if (!is_dynamically_stable(g[i], delta, omega_min)) return false;
  return true;
}

// weak-coupling sideband cooling rate for one axis
inline double cavity_cooling_rate(double g, double delta, double kappa, double omega) {
  if (omega == 0.0) return 0.0;
  if (!is_dynamically_stable(g, delta, omega) && g > 0.0)
    throw instability_error("cavity_cooling_rate: g^2 >= |Delta| Omega");
  const double k2 = kappa * kappa / 4.0;
  const double lm = (delta - omega) * (delta - omega) + k2;
  const double lp = (delta + omega) * (delta + omega) + k2;
  return g * g * kappa * (1.0 / lm - 1.0 / lp);
}

// displacement-noise heating grows as P^2
inline double noise_heating_rate(double power, double reference_power, double rate_ref) {
  if (power <= 0.0) throw domain_error("noise_heating_rate: power must be positive");
  const double x = power / reference_power;
  return rate_ref * x * x;
}

// g0 such that the y cooling rate at the node hits gamma_target
inline double calibrate_g0(double gamma_target, double delta, double kappa,
                           double omega_y) {
  const double k2 = kappa * kappa / 4.0;
  const double lm = (delta - omega_y) * (delta - omega_y) + k2;
  const double lp = (delta + omega_y) * (delta + omega_y) + k2;
  const double shape = kappa * (1.0 / lm - 1.0 / lp);
  if (shape <= 0.0)
    throw domain_error("calibrate_g0: no positive cooling rate at this detuning");
  return std::sqrt(gamma_target / shape);
}

// g0 such that the sharp loss criterion trips exactly at delta_loss: a larger
// coupling makes every smaller detuning a particle-loss point
inline double calibrate_g0_loss_boundary(double delta_loss, double omega_min) {
  if (delta_loss <= 0.0 || omega_min <= 0.0)
    throw domain_error("calibrate_g0_loss_boundary: rates must be positive");
  return std::sqrt(delta_loss * omega_min);
}

struct SystemParams {
  CavityParams cavity;
  TweezerParams tweezer;
  ParticleParams particle;
  EnvironmentParams env;
  PositionPhase phase;
  CouplingParams coupling;

  void validate() {
    cavity.validate();
    tweezer.validate();
    particle.validate();
    env.validate();
    coupling.validate();
  }

  Vec3 trap_freqs() const { return trap_frequencies(tweezer.power, tweezer); }
  Vec3 couplings() const {
    return coupling_rates(coupling.g0, phase.phi, tweezer.polarization_misalignment,
                          coupling.rz_ratio, tweezer.power, tweezer.reference_power);
  }
  double gamma_gas() const { return gas_damping(env, particle); }
  Vec3 noise_heating() const {
    Vec3 r;
    for (int i = 0; i < 3; ++i)
      r[i] = noise_heating_rate(tweezer.power, tweezer.reference_power,
                                env.noise_heating_rate_ref[i]);
    return r;
  }
  Vec3 cooling_rates() const {
    const Vec3 g = couplings();
    const Vec3 omega = trap_freqs();
    Vec3 r;
    for (int i = 0; i < 3; ++i)
      r[i] = cavity_cooling_rate(g[i], tweezer.detuning, cavity.linewidth, omega[i]);
    return r;
  }
  bool stable() const {
    return is_dynamically_stable(couplings(), tweezer.detuning, trap_freqs());
  }

  // reference configuration: 1550 nm tweezer, 6.46 mm cavity at finesse 22e3,
  // 136 nm silica sphere at 0.5 W
  static SystemParams paper_defaults() {
    SystemParams sys;
    sys.validate();
    return sys;
  }
};

inline const std::array<std::string, 3> kAxisNames = {"x", "y", "z"};

} // namespace levicav
