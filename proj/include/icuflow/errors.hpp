#pragma once

#include <stdexcept>
#include <string>

namespace icuflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration and filesystem problems.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Cohort loading.
class MissingFileError : public Error {
 public:
  using Error::Error;
};

class EmptyCohortError : public Error {
 public:
  using Error::Error;
};

class StratumError : public Error {
 public:
  using Error::Error;
};

// Provider failures carry a class: transient errors may be retried, fatal
// ones never are.
enum class ErrorClass { transient, fatal };

class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, ErrorClass error_class, int attempts_used = 1)
      : Error(message), class_(error_class), attempts_(attempts_used) {}

  ErrorClass error_class() const { return class_; }
  int attempts_used() const { return attempts_; }

 private:
  ErrorClass class_;
  int attempts_;
};

// Prompt rendering.
class MissingDependencyError : public Error {
 public:
  MissingDependencyError(const std::string& agent, const std::string& key)
      : Error("agent '" + agent + "' is missing upstream dependency '" + key + "'"),
        agent_(agent),
        key_(key) {}

  const std::string& agent() const { return agent_; }
  const std::string& key() const { return key_; }

 private:
  std::string agent_;
  std::string key_;
};

// Graph validation and execution.
class GraphError : public Error {
 public:
  using Error::Error;
};

class CycleError : public GraphError {
 public:
  using GraphError::GraphError;
};

class UnknownDependencyError : public GraphError {
 public:
  using GraphError::GraphError;
};

class WriteOnceError : public Error {
 public:
  using Error::Error;
};

// Prediction-template parsing. The three classes are distinct so callers can
// tell an absent field from a bad number from an out-of-range value.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ParseMissingFieldError : public ParseError {
 public:
  explicit ParseMissingFieldError(const std::string& field)
      : ParseError("missing required field '" + field + "'"), field_(field) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ParseRangeError : public ParseError {
 public:
  using ParseError::ParseError;
};

class ParseFormatError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Statistics.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

class PairingError : public Error {
 public:
  using Error::Error;
};

}  // namespace icuflow
