#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cfdebias {

enum class ErrorCode {
    // configuration
    ConfigError,
    // data / resources
    ParseError,
    DimensionMismatch,
    EmptyFile,
    EmptyTable,
    IoError,
    UnknownToken,
    NoValidPairs,
    MissingAnchor,
    MissingResource,
    InsufficientVocabulary,
    TooFewProfessions,
    TooFewPairs,
    EmptyTestSet,
    EmptyPairSet,
    EmptyBatch,
    CheckpointMismatch,
    MissingParams,
    MissingAlignmentModel,
    // numerics
    ShapeMismatch,
    NonFiniteGradient,
    NonFiniteLoss,
    DegenerateKernel,
    DegenerateDirection,
    TooFewAnchors,
    IndexOutOfRange,
    ZeroVariance,
};

enum class ErrorCategory { Config, Data, Numeric };

constexpr ErrorCategory category_of(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::ConfigError:
        return ErrorCategory::Config;
    case ErrorCode::ShapeMismatch:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DegenerateKernel:
    case ErrorCode::DegenerateDirection:
    case ErrorCode::TooFewAnchors:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::ZeroVariance:
        return ErrorCategory::Numeric;
    default:
        return ErrorCategory::Data;
    }
}

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error code next to the message.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }

private:
    ErrorCode code_;
};

/// Parse failure pinned to a 1-based line of the offending file.
class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t line, const std::string& message)
        : Error(code, "line " + std::to_string(line) + ": " + message), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace cfdebias
