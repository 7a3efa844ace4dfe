#pragma once

#include <stdexcept>
#include <string>

namespace qfta {

// Base for all library errors. Subtypes let the CLI map failures to
// exit codes and stage names.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with the requested op.
struct ShapeError : Error {
  using Error::Error;
};

// A value outside the mathematical domain of an op (log of non-positive,
// zero reference power, ...).
struct DomainError : Error {
  using Error::Error;
};

// Malformed file contents; message names the offending field.
struct FormatError : Error {
  using Error::Error;
};

// Bad run configuration (unknown key, illegal combination).
struct ConfigError : Error {
  using Error::Error;
};

// Training diverged or its preconditions failed.
struct TrainingError : Error {
  using Error::Error;
};

// API contract violated by the caller (non-scalar backward seed, Local
// ranking with a multi-model zoo, ...).
struct ContractError : Error {
  using Error::Error;
};

// Pipeline failure carrying the name of the stage that failed.
struct StageError : Error {
  std::string stage;
  StageError(std::string stage_name, const std::string& msg)
      : Error(msg), stage(std::move(stage_name)) {}
};

}  // namespace qfta
