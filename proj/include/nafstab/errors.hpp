#pragma once

#include <stdexcept>
#include <string>

namespace nafstab {

// Invalid run configuration (bad dimensions, xi outside the premised region,
// non-PD reward matrices, unknown ids, ...). CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training or online interaction produced non-finite numbers or an unbounded
// state. CLI maps this to exit code 2.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nafstab
