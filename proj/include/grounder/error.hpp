#pragma once

#include <stdexcept>
#include <string>

namespace grounder {

// Malformed input files, violated data invariants, corrupt binaries.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Caller passed arguments outside an operation's precondition.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Binary file written by an incompatible build (bad magic or version).
class VersionError : public DataError {
public:
    using DataError::DataError;
};

class NotFoundError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Generation provider failed after retries, timed out, or replied with garbage.
class ProviderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace grounder
