#pragma once

#include <stdexcept>
#include <string>

namespace panelvit {

/// Base class of every error raised by the library. `kind()` selects the
/// process exit status used by the command-line tool.
class Error : public std::runtime_error {
 public:
  enum class Kind { contract, dimension, config, parameter, data, io };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Caller broke an operation precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(Kind::contract, what) {}
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(Kind::dimension, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::config, what) {}
};

/// A numeric argument is outside its admissible range.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(Kind::parameter, what) {}
};

/// Dataset contents are unusable (missing classes, bad labels, ...).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(Kind::data, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Kind::io, what) {}
};

/// Checkpoint bytes are malformed or disagree with the stored configuration.
class CheckpointError : public IoError {
 public:
  explicit CheckpointError(const std::string& what) : IoError(what) {}
};

/// Exit status convention of the CLI: 1 usage/config, 2 data, 3 I/O.
int exit_code(Error::Kind kind) noexcept;

}  // namespace panelvit
