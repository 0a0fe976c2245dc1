#include "caric/error.hpp"

namespace caric {

const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidMesh: return "invalid-mesh";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::TopologyMismatch: return "topology-mismatch";
    case ErrorCode::OutOfBounds: return "out-of-bounds";
    case ErrorCode::SingularSystem: return "singular-system";
    case ErrorCode::DegenerateTriangle: return "degenerate-triangle";
    case ErrorCode::Unsnappable: return "unsnappable-edit";
    case ErrorCode::MissingCurve: return "missing-curve";
    case ErrorCode::ContractViolation: return "contract-violation";
    case ErrorCode::InsufficientRegion: return "insufficient-region";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::CameraBehindMesh: return "camera-behind-mesh";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::Io: return "io";
    case ErrorCode::Cancelled: return "cancelled";
    case ErrorCode::NotFound: return "not-found";
    }
    return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message)
    , code_(code)
    , message_(message)
{
}

} // namespace caric
