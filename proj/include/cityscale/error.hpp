#pragma once

#include <stdexcept>

namespace cityscale {

/// Malformed input data or bad user parameters. The CLI maps this to exit
/// code 1; anything else escaping a command is an internal error (exit 2).
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cityscale
