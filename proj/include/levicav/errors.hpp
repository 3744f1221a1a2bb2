#pragma once

#include <stdexcept>
#include <string>

namespace levicav {

// parameter outside its physical domain (negative pressure, F <= 1, ...)
class domain_error : public std::invalid_argument {
 public:
  explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

// linearized system has an eigenvalue with non-negative real part ("particle loss")
class instability_error : public std::runtime_error {
 public:
  explicit instability_error(const std::string& what) : std::runtime_error(what) {}
};

// estimator cannot produce a meaningful answer (peak unresolved, trace too short, ...)
class analysis_error : public std::runtime_error {
 public:
  explicit analysis_error(const std::string& what) : std::runtime_error(what) {}
};

// file or directory could not be read or written; message carries the path
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace levicav
