#pragma once

#include <stdexcept>
#include <string>

namespace hydro {

enum class ErrorCode {
    InvalidArgument,
    NonDivisible,
    GhostTooWide,
    TransportFailure,
    SchemeStencilOverflow,
    DimensionNotEven,
    NoConvergence,
    UnknownBoundaryKind,
    NonPositiveTime,
    IoError,
    ReportIncomplete,
};

inline const char* to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonDivisible: return "NonDivisible";
    case ErrorCode::GhostTooWide: return "GhostTooWide";
    case ErrorCode::TransportFailure: return "TransportFailure";
    case ErrorCode::SchemeStencilOverflow: return "SchemeStencilOverflow";
    case ErrorCode::DimensionNotEven: return "DimensionNotEven";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnknownBoundaryKind: return "UnknownBoundaryKind";
    case ErrorCode::NonPositiveTime: return "NonPositiveTime";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ReportIncomplete: return "ReportIncomplete";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error
{
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace hydro
