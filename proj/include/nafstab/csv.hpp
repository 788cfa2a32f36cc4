#pragma once

#include <charconv>
#include <ostream>
#include <string>

namespace nafstab {

// Shortest decimal form that round-trips the exact double; byte-stable for
// identical values, so re-running a command with the same config and seed
// reproduces CSV output byte for byte.
inline std::string fmt_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void csv_cell(std::ostream& os, double v, bool last = false) {
    os << fmt_double(v) << (last ? "\n" : ",");
}

}  // namespace nafstab
