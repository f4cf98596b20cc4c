#pragma once

#include <stdexcept>
#include <string>

namespace vitscape {

// Contract violations: bad arguments, mismatched shapes, broken invariants.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension disagreements between tensors.
struct DimensionError : ContractError {
    using ContractError::ContractError;
};

// Malformed files (checkpoints, IDX, grid CSVs).
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail_contract(const std::string& msg) {
    throw ContractError(msg);
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw ContractError(msg);
    }
}

} // namespace vitscape
