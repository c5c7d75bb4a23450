#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nlgranger {

enum class ErrorCode {
    BadRange,
    ConstantSeries,
    DimensionMismatch,
    SeriesTooShort,
    DegenerateKernel,
    NormFactorMissing,
    NotPSD,
    NonFiniteObjective,
    SingularSystem,
    UnsupportedKind,
    FoldTooSmall,
    InvalidConfig,
    ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (and tests) can branch on the kind of failure without parsing text.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::BadRange: return "BadRange";
    case ErrorCode::ConstantSeries: return "ConstantSeries";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::NormFactorMissing: return "NormFactorMissing";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::FoldTooSmall: return "FoldTooSmall";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

} // namespace nlgranger
