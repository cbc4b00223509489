#pragma once

#include <stdexcept>
#include <string>

namespace signbench {

// Process exit codes: 0 success, 2 usage, 3 config, 4 data, 5 numeric failure.
class Error : public std::runtime_error {
 public:
  Error(int exit_code, const std::string& msg)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(2, msg) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(3, msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(4, msg) {}
};

class FormatError : public DataError {
 public:
  explicit FormatError(const std::string& msg) : DataError(msg) {}
};

class ParseError : public DataError {
 public:
  explicit ParseError(const std::string& msg) : DataError(msg) {}
};

class NormalizationError : public DataError {
 public:
  explicit NormalizationError(const std::string& msg) : DataError(msg) {}
};

class StartupError : public DataError {
 public:
  explicit StartupError(const std::string& msg) : DataError(msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(5, msg) {}
};

class ContractError : public NumericError {
 public:
  explicit ContractError(const std::string& msg) : NumericError(msg) {}
};

class ShapeError : public ContractError {
 public:
  explicit ShapeError(const std::string& msg) : ContractError(msg) {}
};

class LabelError : public ContractError {
 public:
  explicit LabelError(const std::string& msg) : ContractError(msg) {}
};

}  // namespace signbench
