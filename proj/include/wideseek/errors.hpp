#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wideseek {

// Base of every error thrown by the library. kind() is the stable,
// machine-readable name used in CLI error reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual std::string_view kind() const noexcept { return "Error"; }
};

#define WIDESEEK_DEFINE_ERROR(Name)                                               \
  class Name : public Error {                                                     \
   public:                                                                        \
    using Error::Error;                                                           \
    [[nodiscard]] std::string_view kind() const noexcept override { return #Name; } \
  };

// tabletext / metrics
WIDESEEK_DEFINE_ERROR(MalformedTable)
WIDESEEK_DEFINE_ERROR(RowWidthMismatch)
WIDESEEK_DEFINE_ERROR(MissingKeyColumn)

// advantage
WIDESEEK_DEFINE_ERROR(GroupTooSmall)
WIDESEEK_DEFINE_ERROR(MissingLogprob)

// orchestrator / tools / policy
WIDESEEK_DEFINE_ERROR(ContextOverflow)
WIDESEEK_DEFINE_ERROR(BackendUnavailable)
WIDESEEK_DEFINE_ERROR(ToolUnavailable)
WIDESEEK_DEFINE_ERROR(ScriptMiss)
WIDESEEK_DEFINE_ERROR(LengthMismatch)
WIDESEEK_DEFINE_ERROR(CorpusFormatError)
WIDESEEK_DEFINE_ERROR(UnknownUrl)

// datapipe
WIDESEEK_DEFINE_ERROR(ValidationFailure)
WIDESEEK_DEFINE_ERROR(UnparseableAnswer)

// plumbing
WIDESEEK_DEFINE_ERROR(ConfigError)
WIDESEEK_DEFINE_ERROR(IoError)
WIDESEEK_DEFINE_ERROR(PreconditionError)
WIDESEEK_DEFINE_ERROR(FormatError)

#undef WIDESEEK_DEFINE_ERROR

}  // namespace wideseek
