#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mannerist {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. `row()` is the 1-based data row, or 0 for the header.
class ParseError : public Error {
public:
    ParseError(std::size_t row, const std::string& what)
        : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// A stream that fails validate_stream().
class ValidationError : public Error {
public:
    using Error::Error;
};

class OrderingError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Feature-order hash or schema version disagreement between artifacts.
class IncompatibleError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double violation)
        : Error(what), violation_(violation) {}
    double violation() const noexcept { return violation_; }

private:
    double violation_;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mannerist
