#include "dragon/error.hpp"

namespace dragon {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::ScriptExhausted: return "ScriptExhausted";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DanglingClue: return "DanglingClue";
    case ErrorCode::TooManyHops: return "TooManyHops";
    case ErrorCode::NoCluesFound: return "NoCluesFound";
    case ErrorCode::RejectedGeneration: return "RejectedGeneration";
    case ErrorCode::DegenerateHop: return "DegenerateHop";
    case ErrorCode::Precondition: return "Precondition";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::UnknownQuery: return "UnknownQuery";
    case ErrorCode::MissingRubric: return "MissingRubric";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

} // namespace dragon
