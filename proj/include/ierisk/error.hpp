#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ierisk {

// Base for every failure raised by the library. Violations that are data
// (graph validation, unaligned steps) are returned, not thrown.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class GraphError : public Error {
public:
    GraphError(std::string element_id, const std::string& what)
        : Error(element_id.empty() ? what : what + " (" + element_id + ")"),
          element_id_(std::move(element_id)) {}

    const std::string& element_id() const noexcept { return element_id_; }

private:
    std::string element_id_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    // 1-based; 0 when the error is not tied to a line.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// Remote provider unreachable, timed out, or answered with a non-2xx status.
class TransportError : public Error {
public:
    using Error::Error;
};

class ModelError : public Error {
public:
    using Error::Error;
};

} // namespace ierisk
