#pragma once

#include <stdexcept>
#include <string>

namespace ambient {

// Bad input: malformed files, invalid parameters, unknown cases.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure failed (non-convergence, singular matrix, instability).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ambient
