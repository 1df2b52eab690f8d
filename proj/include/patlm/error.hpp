#pragma once

#include <stdexcept>
#include <string>

namespace patlm {

// Failure categories map one-to-one onto CLI exit codes.
enum class ErrorKind { kConfig = 2, kInput = 3, kNumeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string reason, const std::string& detail)
      : std::runtime_error(reason + ": " + detail),
        kind_(kind),
        reason_(std::move(reason)) {}

  ErrorKind kind() const { return kind_; }
  // Short machine-parsable tag, e.g. "input_missing".
  const std::string& reason() const { return reason_; }

 private:
  ErrorKind kind_;
  std::string reason_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string reason, const std::string& detail)
      : Error(ErrorKind::kConfig, std::move(reason), detail) {}
};

class InputError : public Error {
 public:
  InputError(std::string reason, const std::string& detail)
      : Error(ErrorKind::kInput, std::move(reason), detail) {}
};

class NumericError : public Error {
 public:
  NumericError(std::string reason, const std::string& detail)
      : Error(ErrorKind::kNumeric, std::move(reason), detail) {}
};

}  // namespace patlm
