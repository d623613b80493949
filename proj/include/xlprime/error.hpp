#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xlprime {

enum class ErrorCode {
    MalformedFile,
    SchemaViolation,
    DuplicateId,
    ScorerUnreachable,
    ProtocolError,
    ScorerRefused,
    MissingScore,
    NonFiniteInput,
    DegenerateInput,
    NoConvergence,
    OutOfRange,
    SourceExhausted,
    ClassifierUnreachable,
    IncompleteArchive,
    Usage,
};

std::string_view to_string(ErrorCode code);

/// Base exception for everything the library reports; carries a stable code
/// so callers (the CLI in particular) can map failures to exit statuses.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace xlprime
