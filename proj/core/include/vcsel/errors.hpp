#pragma once

#include <stdexcept>
#include <string>

namespace vcsel {

// Each error category maps onto one CLI exit code.
enum class ErrorKind {
  kConfig = 2,
  kCalibration = 3,
  kIntegration = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, what) {}
};

class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& what)
      : Error(ErrorKind::kCalibration, what) {}
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double time_ns)
      : Error(ErrorKind::kIntegration, what), time_ns_(time_ns) {}

  double time_ns() const noexcept { return time_ns_; }

 private:
  double time_ns_;
};

}  // namespace vcsel
