#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgom {

// Process exit codes used by the command line tool.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kDataValidation = 3,
  kNumerical = 4,
  kIo = 5,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const { return ExitCode::kUsage; }
  virtual const char* kind() const { return "error"; }
};

// Collects every problem found while validating a configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }
  ExitCode exit_code() const override { return ExitCode::kUsage; }
  const char* kind() const override { return "config"; }

 private:
  std::vector<std::string> problems_;
};

struct ValidationIssue {
  std::size_t row = 0;  // 1-based line number in the input file; 0 when not tied to a row
  std::string column;
  std::string code;  // duplicate_wave, non_binary, missing_dob, partial_wave, ...
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues);
  const std::vector<ValidationIssue>& issues() const { return issues_; }
  ExitCode exit_code() const override { return ExitCode::kDataValidation; }
  const char* kind() const override { return "validation"; }

 private:
  std::vector<ValidationIssue> issues_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kNumerical; }
  const char* kind() const override { return "numerical"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kIo; }
  const char* kind() const override { return "io"; }
};

// Chain file corruption. The three subclasses are distinct failure modes.
class ChainFormatError : public IoError {
 public:
  using IoError::IoError;
  const char* kind() const override { return "chain_format"; }
};

class ChainVersionError : public ChainFormatError {
 public:
  using ChainFormatError::ChainFormatError;
  const char* kind() const override { return "chain_version"; }
};

class ChainTruncatedError : public ChainFormatError {
 public:
  using ChainFormatError::ChainFormatError;
  const char* kind() const override { return "chain_truncated"; }
};

class ChainChecksumError : public ChainFormatError {
 public:
  using ChainFormatError::ChainFormatError;
  const char* kind() const override { return "chain_checksum"; }
};

}  // namespace tgom
