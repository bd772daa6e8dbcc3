#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace musrec {

enum class ErrorKind {
  EmptyInput,
  EmptyVocabulary,
  EmptyProfile,
  ContractViolation,
  Parse,
  NotFound,
  Validation,
  Configuration,
  Tool,
  Backend,
  Engine,
  Conflict,
  UndefinedMetric,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyInput: return "empty_input";
    case ErrorKind::EmptyVocabulary: return "empty_vocabulary";
    case ErrorKind::EmptyProfile: return "empty_profile";
    case ErrorKind::ContractViolation: return "contract_violation";
    case ErrorKind::Parse: return "parse_error";
    case ErrorKind::NotFound: return "not_found";
    case ErrorKind::Validation: return "validation_error";
    case ErrorKind::Configuration: return "configuration_error";
    case ErrorKind::Tool: return "tool_error";
    case ErrorKind::Backend: return "backend_error";
    case ErrorKind::Engine: return "engine_error";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::UndefinedMetric: return "undefined_metric";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so the service can map
// it onto an HTTP status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace musrec
