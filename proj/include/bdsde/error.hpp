#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bdsde {

/// Invalid user input: grid sizes, assumption constants, config entries.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A precondition of an operation does not hold (length mismatch, index out
/// of range, hypothesis of a check violated).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Allocation of path storage failed.
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A simulation produced a non-finite value. Carries the first offending
/// location so the run can be replayed and inspected.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(const std::string& what, std::ptrdiff_t b_path, std::ptrdiff_t w_path,
                   std::ptrdiff_t node)
        : std::runtime_error(what), b_path_(b_path), w_path_(w_path), node_(node) {}

    std::ptrdiff_t b_path() const noexcept { return b_path_; }
    std::ptrdiff_t w_path() const noexcept { return w_path_; }
    std::ptrdiff_t node() const noexcept { return node_; }

private:
    std::ptrdiff_t b_path_;
    std::ptrdiff_t w_path_;
    std::ptrdiff_t node_;
};

} // namespace bdsde
