#pragma once

#include <stdexcept>

namespace rpo {

// Bad inputs: malformed files, violated preconditions, inconsistent configs.
// The CLI maps this to exit code 2.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// NaN/Inf escaped a numeric routine. The CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace rpo
