#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgnet {

// Base for everything thrown by the library. The CLI maps subtypes to
// stable exit codes, so new failure kinds should extend one of these
// rather than throwing std::runtime_error directly.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape disagreement between tensor operands.
struct DimensionError : Error {
    using Error::Error;
};

// An id or index outside its valid range; the message names the value.
struct IndexError : Error {
    using Error::Error;
};

// An API contract was violated (non-scalar loss, consumed tape, ...).
struct ContractError : Error {
    using Error::Error;
};

// masked_softmax / attention over an all-masked sequence.
struct DegenerateMaskError : Error {
    using Error::Error;
};

// Invalid UTF-8; byte_offset points at the offending byte.
struct EncodingError : Error {
    EncodingError(const std::string& what, std::size_t offset)
        : Error(what), byte_offset(offset) {}
    std::size_t byte_offset;
};

// Empty corpus / article / summary / reference where content is required.
struct EmptyInputError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

// Checkpoint payload or manifest does not match its declared contents.
struct CorruptionError : Error {
    using Error::Error;
};

// Non-finite loss or gradients during training.
struct NumericalError : Error {
    using Error::Error;
};

// Checkpoint hyperparameters conflict with explicitly requested ones.
struct CheckpointMismatchError : Error {
    CheckpointMismatchError(const std::string& what, std::string field_name)
        : Error(what), field(std::move(field_name)) {}
    std::string field;
};

struct UsageError : Error {
    using Error::Error;
};

}  // namespace pgnet
