#pragma once

#include <stdexcept>
#include <string>

namespace surgseg {

/// Malformed input document (bad JSON, bad RLE, bad palette line, ...).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Structurally valid input that violates cross-record constraints
/// (annotation referencing an unknown image, mixed object-id usage, ...).
class IntegrityError : public std::runtime_error {
public:
    explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

/// A session was asked to do something it does not support.
class CapabilityError : public std::runtime_error {
public:
    explicit CapabilityError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / subprocess / wire failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

/// Warning sink. Defaults to stderr; tests may install a counter.
using WarnHandler = void (*)(const std::string& message);
void set_warn_handler(WarnHandler handler);  // nullptr restores the default
void warn(const std::string& message);

}  // namespace surgseg
