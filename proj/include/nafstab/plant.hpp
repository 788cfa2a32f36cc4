#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nafstab/mat.hpp"

namespace nafstab {

// Per-coordinate closed intervals (componentwise box), used for the premised
// parameter set and for initial-state sampling.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    bool contains(std::span<const double> v) const;
    friend bool operator==(const Box&, const Box&) = default;
};

// Parametric discrete-time deterministic plant. The pendulum-like benchmark
//   x1' = x1 + d x2
//   x2' = x2 + d (g sin(x1) - xi1 x2 + xi2 a)
// is the only built-in family; others can be added via register_dynamics.
struct PlantSpec {
    std::string dynamics = "pendulum";
    std::vector<double> xi{0.0, 5.0};
    int state_dim = 2;
    int action_dim = 1;
    Box action_box{{-1.0}, {1.0}};
    std::vector<double> target{0.0, 0.0};
    double gravity = 9.81;
    double dt = 0.0625;  // 2^-4
};

using StepFn = std::function<void(const PlantSpec&, std::span<const double> x, std::span<const double> a,
                                  std::vector<double>& x_next)>;

// Adds a dynamics family. The benchmark id "pendulum" is pre-registered.
void register_dynamics(const std::string& id, StepFn fn);

// One deterministic step. Callers must clip the action into the box first;
// an out-of-box action throws.
void step_into(const PlantSpec& spec, std::span<const double> x, std::span<const double> a,
               std::vector<double>& x_next);
std::vector<double> step(const PlantSpec& spec, std::span<const double> x, std::span<const double> a);

// Quadratic stabilization reward -(x - x*)' R1 (x - x*) - a' R2 a; always
// <= 0, and 0 exactly at (x*, 0).
struct RewardSpec {
    Mat r1;
    Mat r2;
    std::vector<double> target{0.0, 0.0};
};

double reward(const RewardSpec& rs, std::span<const double> x, std::span<const double> a);

// Componentwise clamp into the box; idempotent.
std::vector<double> clip_action(const Box& box, std::span<const double> a);

struct ParamRegion {
    std::vector<std::array<double, 2>> intervals;
    bool contains(std::span<const double> xi) const;
};

// Slow parameter variation: xi2 ramps linearly from `xi2_from` to `xi2_to`
// over [0, ramp_steps], constant after; xi1 held fixed.
struct XiSchedule {
    double xi1 = 1.0;
    double xi2_from = 5.0;
    double xi2_to = 50.0;
    int ramp_steps = 200;
};

std::vector<double> schedule_xi(const XiSchedule& profile, int k);

}  // namespace nafstab
