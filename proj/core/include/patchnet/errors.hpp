#pragma once

#include <stdexcept>
#include <string>

namespace patchnet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad arguments or malformed data.
class InputError : public Error {
public:
    using Error::Error;
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A grid or patch does not cover the region it is asked about.
class GeometryError : public Error {
public:
    using Error::Error;
};

// Instability, non-finite values, failed training.
class NumericalError : public Error {
public:
    using Error::Error;
};

// File contents could not be parsed.
class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace patchnet
