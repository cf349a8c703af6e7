#include "npcsh/error.hpp"

namespace npcsh {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MalformedDocument: return "MalformedDocument";
        case ErrorKind::MissingField: return "MissingField";
        case ErrorKind::DuplicateName: return "DuplicateName";
        case ErrorKind::BadTypeTag: return "BadTypeTag";
        case ErrorKind::NoContextFile: return "NoContextFile";
        case ErrorKind::DuplicateJinxName: return "DuplicateJinxName";
        case ErrorKind::UnresolvedOrchestrator: return "UnresolvedOrchestrator";
        case ErrorKind::UnknownJinx: return "UnknownJinx";
        case ErrorKind::UnboundVariable: return "UnboundVariable";
        case ErrorKind::BadPath: return "BadPath";
        case ErrorKind::CycleDetected: return "CycleDetected";
        case ErrorKind::MissingInput: return "MissingInput";
        case ErrorKind::TypeMismatch: return "TypeMismatch";
        case ErrorKind::BudgetExhausted: return "BudgetExhausted";
        case ErrorKind::DepthExceeded: return "DepthExceeded";
        case ErrorKind::StepFailed: return "StepFailed";
        case ErrorKind::NonzeroExit: return "NonzeroExit";
        case ErrorKind::InterpreterNotFound: return "InterpreterNotFound";
        case ErrorKind::Timeout: return "Timeout";
        case ErrorKind::ProviderError: return "ProviderError";
        case ErrorKind::AuthError: return "AuthError";
        case ErrorKind::ScriptExhausted: return "ScriptExhausted";
        case ErrorKind::MalformedCall: return "MalformedCall";
        case ErrorKind::UnknownTool: return "UnknownTool";
        case ErrorKind::ArgumentTypeError: return "ArgumentTypeError";
        case ErrorKind::MissingRequiredArgument: return "MissingRequiredArgument";
        case ErrorKind::NoSelection: return "NoSelection";
        case ErrorKind::UnknownTarget: return "UnknownTarget";
        case ErrorKind::UnknownSection: return "UnknownSection";
        case ErrorKind::UnknownCommand: return "UnknownCommand";
        case ErrorKind::BadArgs: return "BadArgs";
        case ErrorKind::MalformedSuite: return "MalformedSuite";
        case ErrorKind::DuplicateTaskId: return "DuplicateTaskId";
        case ErrorKind::SetupFailed: return "SetupFailed";
        case ErrorKind::HarnessError: return "HarnessError";
        case ErrorKind::EmptyInput: return "EmptyInput";
        case ErrorKind::UnknownCategory: return "UnknownCategory";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::ZeroVariance: return "ZeroVariance";
        case ErrorKind::InsufficientModels: return "InsufficientModels";
    }
    return "Error";
}

} // namespace npcsh
