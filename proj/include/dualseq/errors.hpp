#pragma once

#include <stdexcept>
#include <string>

namespace dualseq {

// Raised when an optimization or forward pass produces a non-finite value.
// Kept distinct from validation errors so callers can map it to its own exit
// status.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dualseq
