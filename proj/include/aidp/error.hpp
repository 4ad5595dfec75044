#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aidp {

// Error hierarchy shared by the whole library. The CLI maps ConfigError /
// ParseError to exit code 2 and IoError to exit code 3.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor/operand shapes do not satisfy an operation's contract.
struct ShapeError : Error {
    using Error::Error;
};

/// A value is outside its mathematical domain (labels, targets, radii, u).
struct DomainError : Error {
    using Error::Error;
};

/// An API was used against its contract (non-scalar loss, empty rows, ...).
struct ContractError : Error {
    using Error::Error;
};

/// Invalid run / model / training configuration.
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed on-disk artifact; carries the byte offset of the defect.
struct FormatError : Error {
    std::size_t offset;
    FormatError(const std::string& msg, std::size_t off)
        : Error(msg + " (byte offset " + std::to_string(off) + ")"), offset(off) {}
};

/// Malformed config text; carries the 1-based line number.
struct ParseError : Error {
    int line;
    ParseError(const std::string& msg, int ln)
        : Error(msg + " (line " + std::to_string(ln) + ")"), line(ln) {}
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace aidp
