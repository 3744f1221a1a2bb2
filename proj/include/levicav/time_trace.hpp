#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "levicav/errors.hpp"

namespace levicav {

// uniformly sampled multichannel record; samples are (n_samples x n_channels)
struct TimeTrace {
  double dt = 0.0;                     // s
  std::vector<std::string> labels;
  Eigen::MatrixXd samples;
  std::uint64_t seed = 0;

  Eigen::Index n_samples() const { return samples.rows(); }
  Eigen::Index n_channels() const { return samples.cols(); }
  double duration() const { return dt * static_cast<double>(n_samples()); }

  int channel(const std::string& label) const;

  void validate() const {
    if (dt <= 0.0) throw domain_error("TimeTrace: dt must be positive");
    if (n_samples() < 2) throw domain_error("TimeTrace: need at least 2 samples");
    if (static_cast<Eigen::Index>(labels.size()) != n_channels())
      throw domain_error("TimeTrace: label count must match channel count");
  }
};

// binary format: magic "LEVICAV1", labels, dt, seed, column-major float64 payload
void save_trace(const TimeTrace& trace, const std::string& path);
TimeTrace load_trace(const std::string& path);

// time column plus one column per channel, 9 significant digits
void export_trace_csv(const TimeTrace& trace, const std::string& path);

} // namespace levicav
