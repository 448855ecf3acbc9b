#pragma once

#include <stdexcept>
#include <string>

namespace vitag {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes disagree with an operation's contract.
struct ShapeError : Error {
    using Error::Error;
};

// A precondition of an operation was violated (non-scalar loss, empty
// input, all-ignored targets, ...).
struct ContractError : Error {
    using Error::Error;
};

// Mathematical domain violation (e.g. softmax of an empty vector).
struct DomainError : Error {
    using Error::Error;
};

// Bad run or model configuration.
struct ConfigError : Error {
    using Error::Error;
};

// Filesystem / stream failure, message names the offending path.
struct IoError : Error {
    using Error::Error;
};

// Malformed text input, message carries the line number where known.
struct ParseError : Error {
    using Error::Error;
};

// Checkpoint block failed its checksum.
struct IntegrityError : Error {
    using Error::Error;
};

// Checkpoint written by an unsupported format version.
struct VersionError : Error {
    using Error::Error;
};

// Non-finite gradients reached the optimizer; message names the parameter.
struct OptimizerError : Error {
    using Error::Error;
};

// Embedding id (or similar index) out of range.
struct LookupError : Error {
    using Error::Error;
};

// Command line misuse; maps to exit code 1.
struct UsageError : Error {
    using Error::Error;
};

}  // namespace vitag
