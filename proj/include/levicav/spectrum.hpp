#pragma once

#include <string>

#include <Eigen/Core>

#include "levicav/time_trace.hpp"

namespace levicav {

enum class Window { Hann, Rectangular };

// one-sided power spectral density on a uniform frequency grid
struct Spectrum {
  Eigen::VectorXd frequency;  // Hz
  Eigen::VectorXd psd;        // signal^2 / Hz
  double resolution_bandwidth = 0.0;  // Hz
  int n_segments = 0;

  double df() const { return resolution_bandwidth; }
  // integral of the PSD over the full grid (equals signal variance)
  double area() const { return psd.sum() * resolution_bandwidth; }
  // integral restricted to [f_lo, f_hi]
  double band_area(double f_lo, double f_hi) const;
};

Spectrum welch_psd(const TimeTrace& trace, int channel, Eigen::Index segment_length,
                   double overlap_fraction = 0.5, Window window = Window::Hann);

struct CalibrationFactor {
  double c_cal = 1.0;          // meters per signal unit
  double reference_temperature = 300.0;  // K
};

// equipartition calibration against a trace of known temperature
CalibrationFactor calibrate_equipartition(const TimeTrace& trace, int channel,
                                          double t_ref, double mass, double omega);

// T = m Omega^2 * (peak area) / k_B for a spectrum calibrated to meters^2/Hz
double temperature_from_area(const Spectrum& spectrum, double mass, double omega);

// Lorentzian linewidth (FWHM, returned as rad/s) seeded by half-maximum crossings
double fwhm_damping(const Spectrum& spectrum);

struct TemperatureSeries {
  Eigen::VectorXd time;         // s, window centers
  Eigen::VectorXd temperature;  // K
};

enum class SignalUnits { Quadrature, Meters };

// per-window band-limited PSD area converted to temperature; the band is
// center_freq +- band_halfwidth (the "digital noise filtering" step)
TemperatureSeries sliding_temperature(const TimeTrace& trace, int channel,
                                      Eigen::Index window_samples,
                                      Eigen::Index hop_samples, double center_freq_hz,
                                      double band_halfwidth_hz, SignalUnits units,
                                      double mass, double omega);

void export_spectrum_csv(const Spectrum& spectrum, const std::string& path);

} // namespace levicav
