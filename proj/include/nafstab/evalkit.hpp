#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "nafstab/ensemble.hpp"
#include "nafstab/plant.hpp"

namespace nafstab {

// Deterministic policy x -> a.
using Policy = std::function<std::vector<double>(std::span<const double>)>;

constexpr double kSuccessThreshold = -2000.0;  // score >= threshold counts as success
constexpr int kScoreHorizon = 1000;            // rewards accumulated for k = 0..horizon inclusive

struct ScoreReport {
    std::vector<double> xi;
    double score = 0.0;
    bool success = false;
    bool finite = true;  // false when the rollout left the finite range (score = -inf)
    int terms = 0;       // number of accumulated rewards (horizon + 1 when finite)
};

// Cumulative reward of a noiseless greedy rollout from x0: sum over
// k = 0..horizon of R(x[k], policy(x[k])) with x[k+1] = f(x[k], policy(x[k])).
// Actions are clipped into the plant's box before execution.
ScoreReport score_policy(const Policy& policy, const PlantSpec& plant, const RewardSpec& rs,
                         std::span<const double> xi, std::span<const double> x0,
                         int horizon = kScoreHorizon);

struct SweepGrid {
    std::vector<double> xi1s;
    std::vector<double> xi2s;
    std::vector<double> scores;  // row-major: scores[i * xi2s.size() + j]

    double at(std::size_t i, std::size_t j) const { return scores[i * xi2s.size() + j]; }
};

// One independent score per grid cell for a fixed policy. Cells are
// independent; with threads > 1 they are evaluated by a worker pool, output
// identical to the sequential order.
SweepGrid sweep_policy(const Policy& policy, const PlantSpec& plant, const RewardSpec& rs,
                       std::span<const double> xi1s, std::span<const double> xi2s,
                       std::span<const double> x0, int threads = 1);

// Stage-2 sweep: every cell starts a fresh ensemble (uniform w), runs one
// online adaptation against the cell's real system, and reports the
// cumulative reward achieved by that run. Per-cell seeds derive from
// (base_seed, i, j).
SweepGrid sweep_online(const std::function<QEnsemble()>& make, const PlantSpec& plant, const RewardSpec& rs,
                       std::span<const double> xi1s, std::span<const double> xi2s,
                       const OnlineRunConfig& run_cfg, std::uint64_t base_seed, int threads = 1);

void write_sweep_csv(std::ostream& os, const SweepGrid& grid);

struct SurfaceGrid {
    std::vector<double> x1s;
    std::vector<double> x2s;
    int n_a = 1;
    std::vector<double> actions;  // row-major, n_a values per cell
};

// Greedy action over a rectangular state grid (benchmark states are 2-D).
SurfaceGrid policy_surface(const Policy& policy, std::span<const double> x1s, std::span<const double> x2s);

void write_surface_csv(std::ostream& os, const SurfaceGrid& grid);

void write_score_csv(std::ostream& os, const ScoreReport& report);

// Evenly spaced values lo, lo+step, ... while <= hi (with tolerance).
std::vector<double> linspace_step(double lo, double hi, double step);

}  // namespace nafstab
