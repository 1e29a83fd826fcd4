#pragma once

#include <stdexcept>
#include <string>

namespace autotcl {

/// Malformed input file (bad cell, wrong column count, ...).
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t line, std::size_t column)
        : std::runtime_error(what + " (line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ")"),
          line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// A precondition on shapes, sizes or ranges does not hold.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the open domain of a function (e.g. pi == 0).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A data-structure invariant was violated (e.g. a zero entry in g).
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Non-finite values or a degenerate numeric state.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, int layer = -1)
        : std::runtime_error(layer >= 0 ? what + " (layer " + std::to_string(layer) + ")" : what),
          layer_(layer) {}

    int layer() const noexcept { return layer_; }

private:
    int layer_;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key_path, const std::string& what)
        : std::runtime_error(key_path.empty() ? what : key_path + ": " + what), key_path_(key_path) {}

    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace autotcl
