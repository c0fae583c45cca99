#pragma once

#include <stdexcept>
#include <string>

namespace ttlc {

// Error categories surfaced by the CLI as distinct exit codes.
enum class ErrorCategory {
  Config,    // bad configuration or dimensions
  Input,     // bad runtime input (non-finite values, empty batches)
  Data,      // inconsistent recording contents
  Parse,     // malformed file
  Training,  // divergence during optimization
  Pipeline,  // grid search / orchestration failure
  Io,        // filesystem problems
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Input: return "input";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Parse: return "parse";
    case ErrorCategory::Training: return "training";
    case ErrorCategory::Pipeline: return "pipeline";
    case ErrorCategory::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error(ErrorCategory::Config, m) {}
};
struct InputError : Error {
  explicit InputError(const std::string& m) : Error(ErrorCategory::Input, m) {}
};
struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorCategory::Data, m) {}
};
struct ParseError : Error {
  explicit ParseError(const std::string& m) : Error(ErrorCategory::Parse, m) {}
};
class TrainingError : public Error {
 public:
  TrainingError(const std::string& m, std::size_t epoch)
      : Error(ErrorCategory::Training, m), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};
struct PipelineError : Error {
  explicit PipelineError(const std::string& m) : Error(ErrorCategory::Pipeline, m) {}
};
struct IoError : Error {
  explicit IoError(const std::string& m) : Error(ErrorCategory::Io, m) {}
};

}  // namespace ttlc
