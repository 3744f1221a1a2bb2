#include "levicav/spectrum.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "levicav/constants.hpp"
#include "levicav/fit.hpp"

namespace levicav {

namespace {

Eigen::VectorXd make_window(Window window, Eigen::Index n) {
  Eigen::VectorXd w(n);
  switch (window) {
    case Window::Hann:
      for (Eigen::Index i = 0; i < n; ++i)
        w[i] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) /
                                     static_cast<double>(n)));
      break;
    case Window::Rectangular:
      w.setOnes();
      break;
  }
  return w;
}

} // namespace

double Spectrum::band_area(double f_lo, double f_hi) const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < frequency.size(); ++i)
    if (frequency[i] >= f_lo && frequency[i] <= f_hi) sum += psd[i];
  return sum * resolution_bandwidth;
}

Spectrum welch_psd(const TimeTrace& trace, int channel, Eigen::Index segment_length,
                   double overlap_fraction, Window window) {
  trace.validate();
  if (channel < 0 || channel >= trace.n_channels())
    throw domain_error("welch_psd: channel index out of range");
  if (segment_length < 8)
    throw analysis_error("welch_psd: segment length must be >= 8 samples");
  if (segment_length > trace.n_samples())
    throw analysis_error("welch_psd: trace shorter than one segment (need >= " +
                         std::to_string(segment_length) + " samples)");
  if (overlap_fraction < 0.0 || overlap_fraction >= 1.0)
    throw domain_error("welch_psd: overlap fraction must lie in [0, 1)");

  const Eigen::Index n = segment_length;
  const Eigen::Index hop = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround((1.0 - overlap_fraction) *
                                                static_cast<double>(n))));
  const Eigen::VectorXd w = make_window(window, n);
  const double w2sum = w.squaredNorm();
  const double fs = 1.0 / trace.dt;

  const Eigen::VectorXd signal =
      trace.samples.col(channel).array() - trace.samples.col(channel).mean();

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(n));
  std::vector<std::complex<double>> out;
  const Eigen::Index n_bins = n / 2 + 1;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_bins);
  int n_segments = 0;
  for (Eigen::Index start = 0; start + n <= trace.n_samples(); start += hop) {
    for (Eigen::Index i = 0; i < n; ++i)
      buf[static_cast<std::size_t>(i)] = w[i] * signal[start + i];
    fft.fwd(out, buf);
    for (Eigen::Index k = 0; k < n_bins; ++k)
      acc[k] += std::norm(out[static_cast<std::size_t>(k)]);
    ++n_segments;
  }

  Spectrum spec;
  spec.resolution_bandwidth = fs / static_cast<double>(n);
  spec.n_segments = n_segments;
  spec.frequency = Eigen::VectorXd::LinSpaced(n_bins, 0.0,
                                              spec.resolution_bandwidth *
                                                  static_cast<double>(n_bins - 1));
  spec.psd = acc / (static_cast<double>(n_segments) * fs * w2sum);
  // one-sided: interior bins carry the negative-frequency power too
  for (Eigen::Index k = 1; k < n_bins - (n % 2 == 0 ? 1 : 0); ++k) spec.psd[k] *= 2.0;
  return spec;
}

CalibrationFactor calibrate_equipartition(const TimeTrace& trace, int channel,
                                          double t_ref, double mass, double omega) {
  trace.validate();
  const Eigen::VectorXd signal =
      trace.samples.col(channel).array() - trace.samples.col(channel).mean();
  const double rms =
      std::sqrt(signal.squaredNorm() / static_cast<double>(signal.size()));
  if (rms <= 0.0)
    throw analysis_error("calibrate_equipartition: zero-variance trace");
  CalibrationFactor cal;
  cal.reference_temperature = t_ref;
  cal.c_cal = std::sqrt(kBoltzmann * t_ref / (mass * omega * omega)) / rms;
  return cal;
}

double temperature_from_area(const Spectrum& spectrum, double mass, double omega) {
  Eigen::Index peak;
  spectrum.psd.segment(1, spectrum.psd.size() - 1).maxCoeff(&peak);
  peak += 1;
  if (peak <= 1 || peak >= spectrum.psd.size() - 2)
    throw analysis_error("temperature_from_area: mechanical peak clipped by grid edge");
  return mass * omega * omega * spectrum.area() / kBoltzmann;
}

double fwhm_damping(const Spectrum& spectrum) {
  const Eigen::VectorXd& f = spectrum.frequency;
  const Eigen::VectorXd& s = spectrum.psd;
  const Eigen::Index n = s.size();
  Eigen::Index peak;
  s.segment(1, n - 1).maxCoeff(&peak);
  peak += 1;
  const double half = s[peak] / 2.0;

  Eigen::Index above = 0;
  for (Eigen::Index i = 1; i < n; ++i)
    if (s[i] > half) ++above;
  if (above < 5)
    throw analysis_error("fwhm_damping: fewer than 5 bins above half maximum; "
                         "increase the trace length or resolution");

  // half-maximum crossings by linear interpolation, used to seed the fit
  Eigen::Index lo = peak, hi = peak;
  while (lo > 1 && s[lo] > half) --lo;
  while (hi < n - 1 && s[hi] > half) ++hi;
  auto cross = [&](Eigen::Index a, Eigen::Index b) {
    const double t = (half - s[a]) / (s[b] - s[a]);
    return f[a] + t * (f[b] - f[a]);
  };
  const double f_lo = s[lo] > half ? f[lo] : cross(lo, lo + 1);
  const double f_hi = s[hi] > half ? f[hi] : cross(hi - 1, hi);
  const double fwhm_seed = f_hi - f_lo;
  if (fwhm_seed < 3.0 * spectrum.resolution_bandwidth)
    throw analysis_error("fwhm_damping: peak under-resolved (FWHM < 3 resolution "
                         "bandwidths); record a longer trace");

  // Lorentzian fit A / ((f - f0)^2 + (G/2)^2) + B over a window around the peak
  const double f_fit_lo = f[peak] - 10.0 * fwhm_seed;
  const double f_fit_hi = f[peak] + 10.0 * fwhm_seed;
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 1; i < n; ++i)
    if (f[i] >= f_fit_lo && f[i] <= f_fit_hi) idx.push_back(i);
  const auto m = static_cast<Eigen::Index>(idx.size());

  const double g0 = fwhm_seed;
  Eigen::VectorXd x0(4);
  x0 << s[peak] * g0 * g0 / 4.0, f[peak], g0, 0.0;  // (A, f0, G, B)
  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = f[idx[static_cast<std::size_t>(j)]] - x[1];
      r[j] = x[0] / (d * d + x[2] * x[2] / 4.0) + x[3] -
             s[idx[static_cast<std::size_t>(j)]];
    }
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd jac(m, 4);
    for (Eigen::Index j = 0; j < m; ++j) {
      const double d = f[idx[static_cast<std::size_t>(j)]] - x[1];
      const double den = d * d + x[2] * x[2] / 4.0;
      jac(j, 0) = 1.0 / den;
      jac(j, 1) = x[0] * 2.0 * d / (den * den);
      jac(j, 2) = -x[0] * x[2] / (2.0 * den * den);
      jac(j, 3) = 1.0;
    }
    return jac;
  };
  const FitResult fit = levmar(residual, jacobian, x0, {"a", "f0", "fwhm", "b"});
  const double fwhm = fit.converged ? std::abs(fit.estimates[2]) : fwhm_seed;
  return kTwoPi * fwhm;
}

TemperatureSeries sliding_temperature(const TimeTrace& trace, int channel,
                                      Eigen::Index window_samples,
                                      Eigen::Index hop_samples, double center_freq_hz,
                                      double band_halfwidth_hz, SignalUnits units,
                                      double mass, double omega) {
  trace.validate();
  const double min_window = 20.0 * kTwoPi / omega;
  if (static_cast<double>(window_samples) * trace.dt < min_window)
    throw analysis_error("sliding_temperature: window shorter than 20 oscillation "
                         "periods");
  if (hop_samples < 1) throw domain_error("sliding_temperature: hop must be >= 1");

  std::vector<double> times, temps;
  for (Eigen::Index start = 0; start + window_samples <= trace.n_samples();
       start += hop_samples) {
    TimeTrace win;
    win.dt = trace.dt;
    win.labels = {"w"};
    win.samples = trace.samples.block(start, channel, window_samples, 1);
    win.seed = trace.seed;
    const Spectrum spec = welch_psd(win, 0, window_samples, 0.0, Window::Hann);
    const double var = spec.band_area(center_freq_hz - band_halfwidth_hz,
                                      center_freq_hz + band_halfwidth_hz);
    const double t = units == SignalUnits::Quadrature
                         ? kHbar * omega * var / kBoltzmann
                         : mass * omega * omega * var / kBoltzmann;
    times.push_back(trace.dt * (static_cast<double>(start) +
                                static_cast<double>(window_samples) / 2.0));
    temps.push_back(t);
  }
  TemperatureSeries series;
  series.time = Eigen::Map<Eigen::VectorXd>(times.data(),
                                            static_cast<Eigen::Index>(times.size()));
  series.temperature = Eigen::Map<Eigen::VectorXd>(
      temps.data(), static_cast<Eigen::Index>(temps.size()));
  return series;
}

void export_spectrum_csv(const Spectrum& spectrum, const std::string& path) {
  std::FILE* file = std::fopen(path.c_str(), "w");
  if (!file) throw io_error("export_spectrum_csv: cannot open " + path);
  std::fputs("frequency_hz,psd\n", file);
  for (Eigen::Index i = 0; i < spectrum.frequency.size(); ++i)
    std::fprintf(file, "%.9g,%.9g\n", spectrum.frequency[i], spectrum.psd[i]);
  std::fclose(file);
}

} // namespace levicav
