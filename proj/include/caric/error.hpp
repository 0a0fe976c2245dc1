#pragma once

#include <stdexcept>
#include <string>

namespace caric {

enum class ErrorCode {
    InvalidMesh,
    InvalidArgument,
    TopologyMismatch,
    OutOfBounds,
    SingularSystem,
    DegenerateTriangle,
    Unsnappable,
    MissingCurve,
    ContractViolation,
    InsufficientRegion,
    NonConvergence,
    CameraBehindMesh,
    NonFinite,
    Io,
    Cancelled,
    NotFound,
};

const char* to_string(ErrorCode code);

/// Exception type thrown by every engine operation. The code lets callers
/// (the HTTP layer in particular) map failures without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

} // namespace caric
