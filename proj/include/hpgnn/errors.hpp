#pragma once

#include <stdexcept>
#include <string>

namespace hpgnn {

/// Error categories. Each maps to a distinct CLI exit code.
enum class ErrorCode {
    Parse = 1,
    Dimension,
    MissingData,
    Bounds,
    InvalidArgument,
    Convergence,
    Numeric,
    Divergence,
    Stratification,
    Io,
    Internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    const char* kind() const noexcept {
        switch (code_) {
            case ErrorCode::Parse: return "parse";
            case ErrorCode::Dimension: return "dimension";
            case ErrorCode::MissingData: return "missing_data";
            case ErrorCode::Bounds: return "bounds";
            case ErrorCode::InvalidArgument: return "invalid_argument";
            case ErrorCode::Convergence: return "convergence";
            case ErrorCode::Numeric: return "numeric";
            case ErrorCode::Divergence: return "divergence";
            case ErrorCode::Stratification: return "stratification";
            case ErrorCode::Io: return "io";
            case ErrorCode::Internal: return "internal";
        }
        return "unknown";
    }

private:
    ErrorCode code_;
};

struct ParseError : Error {
    explicit ParseError(std::string m) : Error(ErrorCode::Parse, std::move(m)) {}
};
struct DimensionError : Error {
    explicit DimensionError(std::string m) : Error(ErrorCode::Dimension, std::move(m)) {}
};
struct MissingDataError : Error {
    explicit MissingDataError(std::string m) : Error(ErrorCode::MissingData, std::move(m)) {}
};
struct BoundsError : Error {
    explicit BoundsError(std::string m) : Error(ErrorCode::Bounds, std::move(m)) {}
};
struct InvalidArgumentError : Error {
    explicit InvalidArgumentError(std::string m) : Error(ErrorCode::InvalidArgument, std::move(m)) {}
};
struct ConvergenceError : Error {
    explicit ConvergenceError(std::string m) : Error(ErrorCode::Convergence, std::move(m)) {}
};
struct NumericError : Error {
    explicit NumericError(std::string m) : Error(ErrorCode::Numeric, std::move(m)) {}
};
struct DivergenceError : Error {
    explicit DivergenceError(std::string m) : Error(ErrorCode::Divergence, std::move(m)) {}
};
struct StratificationError : Error {
    explicit StratificationError(std::string m) : Error(ErrorCode::Stratification, std::move(m)) {}
};
struct IoError : Error {
    explicit IoError(std::string m) : Error(ErrorCode::Io, std::move(m)) {}
};
struct InternalError : Error {
    explicit InternalError(std::string m) : Error(ErrorCode::Internal, std::move(m)) {}
};

} // namespace hpgnn
