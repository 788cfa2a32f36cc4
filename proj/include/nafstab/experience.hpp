#pragma once

#include <vector>

namespace nafstab {

// One transition (x, a, x', r) obtained through an interaction.
struct Experience {
    std::vector<double> x;
    std::vector<double> a;
    std::vector<double> x_next;
    double r = 0.0;
};

}  // namespace nafstab
