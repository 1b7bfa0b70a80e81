#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pbelab {

/// Every failure the library reports carries one of these kinds.
enum class ErrorKind {
    NonStochasticRow,
    NegativeProbability,
    GammaOutOfRange,
    InvalidArgument,
    SingularSystem,
    NotPrimitive,
    NoConvergence,
    PolicySpaceTooLarge,
    DegenerateDenominator,
    ParseError,
    ValidationError,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::NonStochasticRow: return "NonStochasticRow";
    case ErrorKind::NegativeProbability: return "NegativeProbability";
    case ErrorKind::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NotPrimitive: return "NotPrimitive";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::PolicySpaceTooLarge: return "PolicySpaceTooLarge";
    case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// True for failures caused by the numbers rather than by malformed input.
    bool numerical() const noexcept {
        return kind_ == ErrorKind::SingularSystem || kind_ == ErrorKind::NotPrimitive ||
               kind_ == ErrorKind::NoConvergence || kind_ == ErrorKind::DegenerateDenominator;
    }

private:
    ErrorKind kind_;
};

/// Tolerances shared by every module.
struct Tolerances {
    static constexpr double probability_sum = 1e-12;
    static constexpr double pivot = 1e-12;
    static constexpr double argmax = 1e-9;
    static constexpr double hurwitz = 1e-10;
    static constexpr double conjugate_pair = 1e-8;
    static constexpr double blowup = 1e12;
    static constexpr double degenerate_denominator = 1e-14;
    static constexpr double solve_residual = 1e-9;
};

}  // namespace pbelab
