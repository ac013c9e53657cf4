#pragma once

#include <stdexcept>
#include <string>

namespace viewpaint {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or extent mismatch between tensors.
struct DimensionError : Error {
    using Error::Error;
};

/// A documented precondition was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

/// A computation would produce non-finite or meaningless values
/// (division by ~zero, vanishing denominators, domain violations).
struct NumericError : Error {
    using Error::Error;
};

/// A file could not be parsed (ICDF, PNG, JSON manifest, ...).
struct FormatError : Error {
    using Error::Error;
};

/// Random generation could not satisfy its target within the attempt budget.
struct GenerationError : Error {
    using Error::Error;
};

/// Training diverged or produced non-finite losses.
struct TrainingError : Error {
    using Error::Error;
};

/// Configuration files/flags are inconsistent or contain unknown keys.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace viewpaint
