#pragma once

#include <stdexcept>
#include <string>

namespace qmt {

/// Base class for all workbench errors. The CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Grammar-level failures: unparseable type text, unknown surface forms,
/// sentences that do not reduce. CLI exit code 2.
struct GrammarError : Error {
    using Error::Error;
};

struct TypeParseError : GrammarError {
    using GrammarError::GrammarError;
};

struct LookupError : GrammarError {
    using GrammarError::GrammarError;
};

/// Capacity and precondition failures: qubit limits, malformed structures,
/// unresolved parameters, empty post-selection, encoding overflow. Exit code 3.
struct PreconditionError : Error {
    using Error::Error;
};

struct CapacityError : PreconditionError {
    using PreconditionError::PreconditionError;
};

struct StructuralError : PreconditionError {
    using PreconditionError::PreconditionError;
};

struct BindError : PreconditionError {
    using PreconditionError::PreconditionError;
};

struct NumericError : PreconditionError {
    using PreconditionError::PreconditionError;
};

/// I/O failures: missing files, malformed JSON/TSV. Exit code 4.
struct IoError : Error {
    using Error::Error;
};

}  // namespace qmt
