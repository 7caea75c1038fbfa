#include "atvg/types.hpp"

namespace atvg {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::DimZero: return "DimZero";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::BadTag: return "BadTag";
    case ErrorCode::StoreUnreadable: return "StoreUnreadable";
    case ErrorCode::HttpFailure: return "HttpFailure";
    case ErrorCode::RaggedResponse: return "RaggedResponse";
    case ErrorCode::MissingToken: return "MissingToken";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyMoment: return "EmptyMoment";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::MissingContext: return "MissingContext";
    case ErrorCode::NoCandidateWords: return "NoCandidateWords";
    case ErrorCode::EmptyCaption: return "EmptyCaption";
    case ErrorCode::NoResolvableTokens: return "NoResolvableTokens";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::UnknownVideoId: return "UnknownVideoId";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Error";
}

}  // namespace atvg
