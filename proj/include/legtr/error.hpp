#pragma once

#include <stdexcept>
#include <string>

namespace legtr {

/// Base class for every error raised by the toolkit. The module tag is
/// prepended to the message so that CLI output says where a failure came from.
class Error : public std::runtime_error {
public:
    Error(const std::string& module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(module) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

/// Invalid or inconsistent configuration (exit status 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Array shapes or grids that do not match.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Linear solver failure or non-finite values during time stepping (exit status 3).
class SolverError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace legtr
