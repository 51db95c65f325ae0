#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace muse {

// Input outside an operation's mathematical domain (e.g. log of a non-positive value).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Operand shapes disagree; a kind of contract violation.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

// A dataset file is missing or unreadable.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A dataset file is readable but malformed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No valid split could be drawn.
class SplitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A training loss turned NaN or infinite.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::size_t epoch, std::string phase)
      : std::runtime_error("non-finite " + phase + " loss at epoch " + std::to_string(epoch)),
        epoch_(epoch),
        phase_(std::move(phase)) {}

  std::size_t epoch() const { return epoch_; }
  const std::string& phase() const { return phase_; }

 private:
  std::size_t epoch_;
  std::string phase_;
};

}  // namespace muse
