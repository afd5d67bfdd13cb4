#pragma once

#include <stdexcept>
#include <string>

namespace imlc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class SimulationDivergedError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(int epoch, const std::string& what);
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// Malformed model/episode/config file. `field()` names the offending key.
class DeserializationError : public Error {
 public:
  DeserializationError(std::string field, const std::string& what);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OptimizationFailedError : public Error {
 public:
  using Error::Error;
};

/// Episode file whose header and body disagree, or a corrupt line.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

class RenderError : public Error {
 public:
  using Error::Error;
};

class GatewayError : public Error {
 public:
  GatewayError(int status, const std::string& what);
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace imlc
