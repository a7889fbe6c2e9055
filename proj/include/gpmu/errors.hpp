#pragma once

#include <stdexcept>
#include <string>

namespace gpmu {

// Base for everything the library throws on purpose. The CLI maps the
// concrete types to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand dimensions are incompatible (message names both shapes).
struct ShapeError : Error {
  using Error::Error;
};

// A precondition on an operation was violated.
struct ContractError : Error {
  using Error::Error;
};

// A text artifact could not be parsed (message carries location).
struct ParseError : Error {
  using Error::Error;
};

// A file parsed but violates its schema (missing block, bad field count).
struct SchemaError : Error {
  using Error::Error;
};

// Structurally valid input that breaks a domain invariant (message names
// the invariant).
struct ValidationError : Error {
  using Error::Error;
};

// Magic/version line of a file does not match what the reader supports.
struct VersionError : Error {
  using Error::Error;
};

// A required input file is absent.
struct MissingArtifactError : Error {
  using Error::Error;
};

// Training or evaluation produced a non-finite quantity.
struct NumericError : Error {
  using Error::Error;
};

// Bad command line or config (unknown key, invalid value).
struct UsageError : Error {
  using Error::Error;
};

}  // namespace gpmu
