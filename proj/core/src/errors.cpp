#include "imlc/errors.hpp"

#include <utility>

namespace imlc {

TrainingDivergedError::TrainingDivergedError(int epoch, const std::string& what)
    : Error("training diverged at epoch " + std::to_string(epoch) + ": " + what),
      epoch_(epoch) {}

DeserializationError::DeserializationError(std::string field, const std::string& what)
    : Error("bad field '" + field + "': " + what), field_(std::move(field)) {}

GatewayError::GatewayError(int status, const std::string& what)
    : Error(what + " (HTTP status " + std::to_string(status) + ")"), status_(status) {}

}  // namespace imlc
