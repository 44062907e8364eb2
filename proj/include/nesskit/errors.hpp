#pragma once

#include <stdexcept>
#include <string>

namespace nesskit {

// Malformed or inconsistent configuration. The message names the offending key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical precondition does not hold (grid too coarse, degenerate threshold, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace nesskit
