#pragma once

namespace levicav {

// CODATA 2018 values
inline constexpr double kSpeedOfLight = 2.99792458e8;    // m/s
inline constexpr double kBoltzmann = 1.380649e-23;       // J/K
inline constexpr double kHbar = 1.054571817e-34;         // J s
inline constexpr double kAtomicMassUnit = 1.66053906660e-27; // kg
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// unit conversions used at the I/O boundary; internals are SI + rad/s
inline constexpr double kPascalPerMbar = 100.0;

constexpr double hz_to_rad(double f) { return kTwoPi * f; }
constexpr double rad_to_hz(double w) { return w / kTwoPi; }
constexpr double mbar_to_pa(double p) { return p * kPascalPerMbar; }
constexpr double pa_to_mbar(double p) { return p / kPascalPerMbar; }

} // namespace levicav
