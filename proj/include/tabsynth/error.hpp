#pragma once

#include <stdexcept>
#include <string>

namespace tabsynth {

// Malformed input data or schema: bad CSV cells, kind violations, shape mismatch.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical routine failed to produce a result (e.g. ICA non-convergence).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad call parameters (out-of-range k, negative budget, ...) raise
// std::invalid_argument directly.

} // namespace tabsynth
