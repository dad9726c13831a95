#pragma once

#include <stdexcept>
#include <string>

namespace dexsim {

// Invalid inputs: bad parameters, malformed files, out-of-domain arguments.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failure: a solver or series did not converge within its budget.
// The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace dexsim
