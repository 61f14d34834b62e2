#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hsel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside an operation's domain (bad shapes, negative entries, unmapped tuples).
class DomainError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  SizeError(const std::string& what, unsigned long long count) : Error(what), count_(count) {}
  unsigned long long count() const { return count_; }

 private:
  unsigned long long count_;
};

class UnrealizableError : public Error {
 public:
  using Error::Error;
};

class StructureError : public Error {
 public:
  using Error::Error;
};

class AmbiguityError : public Error {
 public:
  using Error::Error;
};

class IndeterminateError : public Error {
 public:
  using Error::Error;
};

class NoBottleneckError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFamilyError : public Error {
 public:
  using Error::Error;
};

class BudgetError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::vector<double> trace) : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

// A pipeline stage failed; what() names the stage and seed.
class StageError : public Error {
 public:
  StageError(std::string stage, unsigned long long seed, const std::string& cause)
      : Error("stage '" + stage + "' failed for seed " + std::to_string(seed) + ": " + cause), stage_(std::move(stage)), seed_(seed) {}
  const std::string& stage() const { return stage_; }
  unsigned long long seed() const { return seed_; }

 private:
  std::string stage_;
  unsigned long long seed_;
};

}  // namespace hsel
