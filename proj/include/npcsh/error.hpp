#pragma once

#include <stdexcept>
#include <string>

namespace npcsh {

// Every failure the library reports carries one of these kinds so callers
// can branch on the condition instead of matching message text.
enum class ErrorKind {
    // document parsing / loading
    MalformedDocument,
    MissingField,
    DuplicateName,
    BadTypeTag,
    NoContextFile,
    DuplicateJinxName,
    UnresolvedOrchestrator,

    // name resolution
    UnknownJinx,

    // template rendering
    UnboundVariable,
    BadPath,

    // expansion / execution
    CycleDetected,
    MissingInput,
    TypeMismatch,
    BudgetExhausted,
    DepthExceeded,
    StepFailed,
    NonzeroExit,
    InterpreterNotFound,
    Timeout,

    // gateway
    ProviderError,
    AuthError,
    ScriptExhausted,

    // tool calls
    MalformedCall,
    UnknownTool,
    ArgumentTypeError,
    MissingRequiredArgument,

    // orchestration
    NoSelection,
    UnknownTarget,
    UnknownSection,

    // shell
    UnknownCommand,
    BadArgs,

    // benchmark harness
    MalformedSuite,
    DuplicateTaskId,
    SetupFailed,
    HarnessError,

    // analytics
    EmptyInput,
    UnknownCategory,
    LengthMismatch,
    ZeroVariance,
    InsufficientModels,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace npcsh
