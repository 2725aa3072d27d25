#pragma once

#include <stdexcept>
#include <string>

namespace bethexx {

enum class ErrorCode {
    PoleAtArgument,
    OddHoleCount,
    SizeLimitExceeded,
    SectorMismatch,
    NonConvergence,
    QuantumNumberCollision,
    DeviationUnderflow,
    UnpairedComplexRoot,
    AmbiguousBoundary,
    CoincidingParameters,
    SingularGaudin,
    BranchBoundary,
    QuadratureFailure,
    PoleArgument,
    CoincidingHoles,
    InvalidArgument,
    ConfigParse,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
        case ErrorCode::PoleAtArgument: return "PoleAtArgument";
        case ErrorCode::OddHoleCount: return "OddHoleCount";
        case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
        case ErrorCode::SectorMismatch: return "SectorMismatch";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::QuantumNumberCollision: return "QuantumNumberCollision";
        case ErrorCode::DeviationUnderflow: return "DeviationUnderflow";
        case ErrorCode::UnpairedComplexRoot: return "UnpairedComplexRoot";
        case ErrorCode::AmbiguousBoundary: return "AmbiguousBoundary";
        case ErrorCode::CoincidingParameters: return "CoincidingParameters";
        case ErrorCode::SingularGaudin: return "SingularGaudin";
        case ErrorCode::BranchBoundary: return "BranchBoundary";
        case ErrorCode::QuadratureFailure: return "QuadratureFailure";
        case ErrorCode::PoleArgument: return "PoleArgument";
        case ErrorCode::CoincidingHoles: return "CoincidingHoles";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::ConfigParse: return "ConfigParse";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace bethexx
