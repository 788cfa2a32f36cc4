#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nafstab/ensemble.hpp"
#include "nafstab/errors.hpp"
#include "nafstab/evalkit.hpp"
#include "nafstab/plant.hpp"
#include "nafstab/stage1.hpp"

namespace nafstab {

// Full run configuration. Defaults reproduce the benchmark setup; a JSON
// config file overrides fields selectively.
struct RunConfig {
    std::uint64_t seed = 0;
    std::string out_dir = "runs/out";

    PlantSpec plant;  // xi is filled per virtual/real system at use time
    ParamRegion region;
    RewardSpec reward;
    std::map<int, std::vector<double>> virtual_systems;

    Stage1Config stage1;  // adam_step_size/seed are set per system
    std::map<int, double> step_sizes;
    double default_step_size = 1e-4;

    // stage 2
    double eta = 1e-7;
    double eps_w = 1e-9;
    double alpha = 5e-5;
    double stage2_gamma = 0.99;
    int online_steps = 1001;
    NoisePolicy noise;
    std::vector<double> x0;
    std::vector<double> xi_real;
    XiSchedule schedule;

    // evaluation grids
    std::vector<double> grid_xi1;
    std::vector<double> grid_xi2;
    std::vector<double> surface_x1s;
    std::vector<double> surface_x2s;
};

// Benchmark defaults: the 8 virtual systems, reward matrices, stage-1/2
// constants, the 10x45 evaluation grid.
RunConfig default_config();

// Defaults overridden by the JSON file at path. Throws ConfigError on
// malformed input.
RunConfig load_config(const std::string& path);

// Small-network preset: 2x64 hidden layers, 500 episodes.
void apply_desk_scale(RunConfig& cfg);

// Rejects xi outside the premised region, non-PD reward matrices, and
// inconsistent dimensions before any computation. Throws ConfigError.
void validate(const RunConfig& cfg);

// Canonical JSON snapshot (sorted keys); written next to run outputs so a
// run directory is reproducible on its own.
std::string config_snapshot(const RunConfig& cfg);

// Stage-1 configuration for one virtual system: per-system Adam step size
// and a seed derived from (cfg.seed, id).
Stage1Config stage1_for_system(const RunConfig& cfg, int id);

std::string model_filename(int id);

}  // namespace nafstab
