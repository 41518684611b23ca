#pragma once

#include <stdexcept>
#include <string>

namespace fracflow {

/// Caller violated a documented precondition (bad argument, mismatched grids, ...).
struct usage_error : std::invalid_argument {
    explicit usage_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Input data is malformed (non-finite values, inconsistent shapes, ...).
struct data_error : std::runtime_error {
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A solve aborted at runtime (blow-up ceiling hit, non-finite state, ...).
struct solve_error : std::runtime_error {
    explicit solve_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Configuration file failed schema validation; message names the field path.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fracflow
