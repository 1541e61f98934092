#pragma once

#include <stdexcept>
#include <string>

namespace aistk {

// Error taxonomy used across the library. Everything derives from
// std::runtime_error so callers can catch broadly or by category.

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error("format error: " + msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error("domain error: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("i/o error: " + msg) {}
};

struct UnsupportedInputError : std::runtime_error {
    explicit UnsupportedInputError(const std::string& msg)
        : std::runtime_error("unsupported input: " + msg) {}
};

}  // namespace aistk
