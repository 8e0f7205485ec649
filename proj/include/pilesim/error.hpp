#pragma once

#include <stdexcept>
#include <string>

namespace pilesim {

/// Base for every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Grid rounds to zero piles.
class ZeroArea : public Error {
public:
    using Error::Error;
};

/// Concave bend leaves no room between the pile tips and the bend axis.
class GeometryUnderflow : public Error {
public:
    using Error::Error;
};

/// Terminals lie in different connected components.
class OpenCircuit : public Error {
public:
    using Error::Error;
};

class ZeroBaseline : public Error {
public:
    using Error::Error;
};

class DegenerateBaseline : public Error {
public:
    using Error::Error;
};

/// Linear solve failed or its residual exceeded tolerance.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// Errors tied to one field of an input document.
class FieldError : public Error {
public:
    FieldError(std::string field_path, const std::string& message)
        : Error(field_path.empty() ? message : field_path + ": " + message),
          field_path_(std::move(field_path)) {}

    const std::string& field_path() const noexcept { return field_path_; }

private:
    std::string field_path_;
};

/// Malformed document (not valid JSON, wrong top-level type).
class ParseError : public FieldError {
public:
    using FieldError::FieldError;
};

/// Unknown key, wrong type or invariant violation.
class SchemaError : public FieldError {
public:
    using FieldError::FieldError;
};

}  // namespace pilesim
