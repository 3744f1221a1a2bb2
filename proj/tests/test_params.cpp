#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "levicav/params.hpp"

using namespace levicav;

namespace {
double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }
} // namespace

TEST_CASE("linewidth from finesse") {
  // reference cavity: F = 22e3, L = 6.46 mm -> kappa = 2pi x 1.055 MHz
  const double kappa = linewidth_from_finesse(22.0e3, 6.46e-3);
  CHECK(rad_to_hz(kappa) == doctest::Approx(1.055e6).epsilon(1e-3));
  // within the quoted 1.06(8) MHz
  CHECK(std::abs(rad_to_hz(kappa) - 1.06e6) < 0.08e6);

  // inverse proportionality in L
  CHECK(linewidth_from_finesse(22.0e3, 2.0 * 6.46e-3) ==
        doctest::Approx(kappa / 2.0));

  CHECK(linewidth_from_finesse(1.0e4, 1.0e-2) == doctest::Approx(9.4178e6).epsilon(1e-4));

  CHECK_THROWS_AS(linewidth_from_finesse(0.5, 1.0), domain_error);
  CHECK_THROWS_AS(linewidth_from_finesse(1.0e4, -1.0), domain_error);

  // round-trip identity kappa F L / (pi c) = 1
  for (double f : {1.0e3, 2.2e4, 5.0e5}) {
    for (double l : {1.0e-3, 6.46e-3, 0.1}) {
      CHECK(linewidth_from_finesse(f, l) * f * l / (kPi * kSpeedOfLight) ==
            doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("purcell factor and scattered fraction") {
  const double eta = purcell_factor(22.0e3, 1550.0e-9, 48.0e-6);
  CHECK(eta == doctest::Approx(4.44).epsilon(2e-3));
  CHECK(purcell_factor(22.0e3, 1550.0e-9, 48.0e-6 * std::sqrt(6.0)) ==
        doctest::Approx(eta / 6.0));
  CHECK(purcell_factor(11.0e3, 1550.0e-9, 48.0e-6) == doctest::Approx(2.22).epsilon(2e-3));

  CHECK(scattered_fraction(eta) == doctest::Approx(0.816).epsilon(1e-3));
  CHECK(scattered_fraction(0.0) == 0.0);
  CHECK(scattered_fraction(1.0) == doctest::Approx(0.5));

  // strictly increasing, bounded in [0, 1)
  double prev = -1.0;
  for (double e = 0.0; e < 50.0; e += 0.5) {
    const double frac = scattered_fraction(e);
    CHECK(frac > prev);
    CHECK(frac >= 0.0);
    CHECK(frac < 1.0);
    prev = frac;
  }
}

TEST_CASE("particle mass") {
  CHECK(particle_mass(136.0e-9, 1850.0) == doctest::Approx(2.44e-18).epsilon(2e-3));
  CHECK(particle_mass(2.0 * 136.0e-9, 1850.0) ==
        doctest::Approx(8.0 * particle_mass(136.0e-9, 1850.0)));
  CHECK(particle_mass(1.0, 6.0 / kPi) == doctest::Approx(1.0));
  CHECK_THROWS_AS(particle_mass(-1.0, 1850.0), domain_error);
}

TEST_CASE("trap frequencies scale with sqrt(P)") {
  TweezerParams tw;
  const Vec3 ref = trap_frequencies(0.5, tw);
  CHECK(rad_to_hz(ref[0]) == doctest::Approx(0.12e6));
  CHECK(rad_to_hz(ref[1]) == doctest::Approx(0.14e6));
  CHECK(rad_to_hz(ref[2]) == doctest::Approx(0.04e6));

  const Vec3 quarter = trap_frequencies(0.5 / 4.0, tw);
  for (int i = 0; i < 3; ++i) CHECK(quarter[i] == doctest::Approx(ref[i] / 2.0));

  CHECK(rad_to_hz(trap_frequencies(0.25, tw)[0]) == doctest::Approx(84.9e3).epsilon(1e-3));

  // Omega^4 / P^2 independent of P
  const double invariant = std::pow(ref[1], 4) / (0.5 * 0.5);
  for (double p : {0.1, 0.24, 0.33, 0.5, 0.8}) {
    const Vec3 w = trap_frequencies(p, tw);
    CHECK(std::pow(w[1], 4) / (p * p) == doctest::Approx(invariant).epsilon(1e-9));
  }
  CHECK_THROWS_AS(trap_frequencies(0.0, tw), domain_error);
}

TEST_CASE("gas damping") {
  ParticleParams particle;
  EnvironmentParams env;
  env.pressure = mbar_to_pa(3.0e-3);
  const double gamma = gas_damping(env, particle);
  // kinetic formula evaluation; consistent with the measured ~2pi x 2.5 Hz
  CHECK(gamma == doctest::Approx(19.21).epsilon(1e-3));
  CHECK(rel_err(rad_to_hz(gamma), 2.5) < 0.25);

  env.pressure = 0.0;
  CHECK(gas_damping(env, particle) == 0.0);

  // exact linearity in pressure
  env.pressure = mbar_to_pa(3.0e-3);
  const double base = gas_damping(env, particle);
  for (double a : {0.1, 2.0, 10.0, 1000.0}) {
    env.pressure = mbar_to_pa(3.0e-3) * a;
    CHECK(gas_damping(env, particle) == doctest::Approx(a * base).epsilon(1e-12));
  }
}

TEST_CASE("coupling rates") {
  const double g0 = hz_to_rad(10.0e3);

  SUBCASE("node: g_z vanishes, g_y maximal") {
    const Vec3 g = coupling_rates(g0, kPi / 2.0, 0.1, 1.0, 0.5, 0.5);
    CHECK(std::abs(g[2]) < 1e-9);
    CHECK(g[1] == doctest::Approx(g0));
  }
  SUBCASE("antinode: g_x and g_y vanish, g_z maximal") {
    const Vec3 g = coupling_rates(g0, 0.0, 0.1, 1.0, 0.5, 0.5);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == doctest::Approx(g0));
  }
  SUBCASE("slope") {
    const Vec3 g = coupling_rates(g0, kPi / 4.0, 0.1, 1.0, 0.5, 0.5);
    CHECK(rad_to_hz(g[0]) == doctest::Approx(0.7071e3).epsilon(1e-3));
    CHECK(rad_to_hz(g[1]) == doctest::Approx(7.071e3).epsilon(1e-3));
    CHECK(rad_to_hz(g[2]) == doctest::Approx(7.071e3).epsilon(1e-3));
  }
  SUBCASE("pythagorean identity at epsilon = 0") {
    for (double phi : {0.0, 0.3, 0.7, 1.2, kPi / 2.0}) {
      for (double p : {0.24, 0.5}) {
        const Vec3 g = coupling_rates(g0, phi, 0.0, 0.7, p, 0.5);
        const double lhs = g[1] * g[1] + (g[2] / 0.7) * (g[2] / 0.7);
        CHECK(lhs == doctest::Approx(g0 * g0 * p / 0.5).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("dynamical stability predicate") {
  CHECK(is_dynamically_stable(hz_to_rad(10.0e3), hz_to_rad(400.0e3), hz_to_rad(40.0e3)));
  CHECK_FALSE(is_dynamically_stable(hz_to_rad(10.0e3), 0.0, hz_to_rad(40.0e3)));
  CHECK(is_dynamically_stable(0.0, 0.0, hz_to_rad(40.0e3)));
  CHECK_THROWS_AS(is_dynamically_stable(1.0, 1.0, 0.0), domain_error);

  // vector form uses the smallest trap frequency
  const Vec3 omega(hz_to_rad(120.0e3), hz_to_rad(140.0e3), hz_to_rad(40.0e3));
  const Vec3 g_ok(0.0, hz_to_rad(33.0e3), 0.0);
  CHECK(is_dynamically_stable(g_ok, hz_to_rad(400.0e3), omega));
  const Vec3 g_big(0.0, hz_to_rad(300.0e3), 0.0);
  CHECK_FALSE(is_dynamically_stable(g_big, hz_to_rad(400.0e3), omega));
}

TEST_CASE("minimum phonon number") {
  CHECK(min_phonon_number(hz_to_rad(1.06e6), hz_to_rad(0.14e6)) ==
        doctest::Approx(1.893).epsilon(1e-3));
  CHECK(min_phonon_number(4.0, 1.0) == doctest::Approx(1.0));
  CHECK(min_phonon_number(hz_to_rad(1.06e6), hz_to_rad(0.04e6)) ==
        doctest::Approx(6.625).epsilon(1e-3));
}

TEST_CASE("cavity cooling rate") {
  const double kappa = hz_to_rad(1.06e6);
  const double delta = hz_to_rad(400.0e3);
  const double omega = hz_to_rad(140.0e3);
  const double g = hz_to_rad(10.0e3);
  CHECK(rad_to_hz(cavity_cooling_rate(g, delta, kappa, omega)) ==
        doctest::Approx(119.0).epsilon(2e-3));

  CHECK(cavity_cooling_rate(0.0, 0.0, kappa, omega) == 0.0);
  CHECK(cavity_cooling_rate(2.0 * g, delta, kappa, omega) ==
        doctest::Approx(4.0 * cavity_cooling_rate(g, delta, kappa, omega)));

  // antisymmetric in Delta, vanishes with Omega
  for (double d : {hz_to_rad(200.0e3), delta, hz_to_rad(2.0e6)}) {
    CHECK(cavity_cooling_rate(g, -d, kappa, omega) ==
          doctest::Approx(-cavity_cooling_rate(g, d, kappa, omega)).epsilon(1e-12));
  }
  CHECK(cavity_cooling_rate(g, delta, kappa, 0.0) == 0.0);

  CHECK_THROWS_AS(cavity_cooling_rate(hz_to_rad(300.0e3), delta, kappa, omega),
                  instability_error);
}

TEST_CASE("noise heating rate") {
  CHECK(noise_heating_rate(0.5, 0.5, 33.0) == doctest::Approx(33.0));
  CHECK(noise_heating_rate(0.25, 0.5, 33.0) == doctest::Approx(8.25));
  CHECK(noise_heating_rate(1.0e-9, 0.5, 33.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("g0 calibration hits the target cooling rate") {
  const double kappa = linewidth_from_finesse(22.0e3, 6.46e-3);
  const double target = hz_to_rad(1.3e3);
  const double g0 = calibrate_g0(target, hz_to_rad(400.0e3), kappa, hz_to_rad(0.14e6));
  CHECK(cavity_cooling_rate(g0, hz_to_rad(400.0e3), kappa, hz_to_rad(0.14e6)) ==
        doctest::Approx(target).epsilon(1e-9));
  // the default g0 = 2pi x 33 kHz is close to this calibration
  CHECK(rel_err(g0, hz_to_rad(33.0e3)) < 0.05);
}

TEST_CASE("cavity params consistency") {
  CavityParams cav;
  cav.validate();
  CHECK(std::abs(cav.linewidth - kPi * kSpeedOfLight / (cav.finesse * cav.length)) /
            cav.linewidth < 1e-6);

  CavityParams from_kappa;
  from_kappa.finesse = 0.0;
  from_kappa.linewidth = hz_to_rad(1.06e6);
  from_kappa.validate();
  CHECK(from_kappa.finesse == doctest::Approx(21.89e3).epsilon(1e-3));

  CavityParams bad;
  bad.linewidth = 2.0 * linewidth_from_finesse(bad.finesse, bad.length);
  CHECK_THROWS_AS(bad.validate(), domain_error);
}

TEST_CASE("system params plumbing") {
  SystemParams sys = SystemParams::paper_defaults();
  CHECK(sys.stable());
  CHECK(sys.couplings()[2] == doctest::Approx(0.0).epsilon(1e-9)); // node default
  CHECK(sys.noise_heating()[2] == doctest::Approx(330.0));
  sys.tweezer.power = 0.25;
  CHECK(sys.noise_heating()[0] == doctest::Approx(33.0 * 0.25));
}
