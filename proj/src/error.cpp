#include "cfdebias/error.hpp"

namespace cfdebias {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::NoValidPairs: return "NoValidPairs";
    case ErrorCode::MissingAnchor: return "MissingAnchor";
    case ErrorCode::MissingResource: return "MissingResource";
    case ErrorCode::InsufficientVocabulary: return "InsufficientVocabulary";
    case ErrorCode::TooFewProfessions: return "TooFewProfessions";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::EmptyPairSet: return "EmptyPairSet";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::MissingParams: return "MissingParams";
    case ErrorCode::MissingAlignmentModel: return "MissingAlignmentModel";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::TooFewAnchors: return "TooFewAnchors";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    }
    return "UnknownError";
}

} // namespace cfdebias
