#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "nafstab/config.hpp"

using namespace nafstab;

namespace {

std::string write_temp_config(const std::string& body) {
    const auto path = (std::filesystem::temp_directory_path() / "nafstab_test_config.json").string();
    std::ofstream os(path);
    os << body;
    return path;
}

}  // namespace

TEST_CASE("default config matches the benchmark setup") {
    const RunConfig cfg = default_config();
    validate(cfg);

    CHECK(cfg.virtual_systems.size() == 8);
    CHECK(cfg.virtual_systems.at(1) == std::vector<double>{0.0, 5.0});
    CHECK(cfg.virtual_systems.at(4) == std::vector<double>{1.0, 50.0});
    CHECK(cfg.virtual_systems.at(8) == std::vector<double>{0.6, 32.0});

    CHECK(cfg.step_sizes.at(1) == 5e-4);
    CHECK(cfg.step_sizes.at(2) == 5e-5);
    CHECK(cfg.step_sizes.at(5) == 5e-5);
    CHECK(cfg.step_sizes.at(6) == 5e-5);
    CHECK(cfg.step_sizes.at(3) == 1e-4);
    CHECK(cfg.step_sizes.at(4) == 1e-4);
    CHECK(cfg.step_sizes.at(7) == 1e-4);
    CHECK(cfg.step_sizes.at(8) == 1e-4);

    CHECK(cfg.stage1.naf.hidden == std::vector<int>{128, 128, 128, 128});
    CHECK(cfg.stage1.minibatch == 128);
    CHECK(cfg.stage1.buffer_capacity == 1000000);
    CHECK(cfg.stage1.gamma == 0.99);
    CHECK(cfg.stage1.tau == 0.005);

    CHECK(cfg.eta == 1e-7);
    CHECK(cfg.eps_w == 1e-9);
    CHECK(cfg.alpha == 5e-5);
    CHECK(cfg.online_steps == 1001);
    CHECK(cfg.noise.kind == NoiseKind::kDecay);
    CHECK(cfg.noise.horizon == 400);

    CHECK(cfg.grid_xi1.size() == 10);
    CHECK(cfg.grid_xi2.size() == 45);
    CHECK(cfg.plant.dt == 0.0625);
    CHECK(cfg.plant.gravity == 9.81);
    CHECK(cfg.reward.r1(0, 0) == 1.0);
    CHECK(cfg.reward.r1(1, 1) == 0.1);
    CHECK(cfg.reward.r2(0, 0) == 10.0);
}

TEST_CASE("desk scale preset") {
    RunConfig cfg = default_config();
    apply_desk_scale(cfg);
    CHECK(cfg.stage1.naf.hidden == std::vector<int>{64, 64});
    CHECK(cfg.stage1.episodes == 500);
    CHECK(cfg.stage1.train_state_bound == 12.0);
    validate(cfg);
}

TEST_CASE("json overrides merge over defaults") {
    const auto path = write_temp_config(R"({
        "seed": 42,
        "stage1": {"episodes": 7, "hidden": [16, 16]},
        "stage2": {"alpha": 1e-4, "noise": {"kind": "norm-gated"}},
        "eval": {"xi1": [0.5], "xi2": [10.0]}
    })");
    const RunConfig cfg = load_config(path);
    CHECK(cfg.seed == 42);
    CHECK(cfg.stage1.episodes == 7);
    CHECK(cfg.stage1.naf.hidden == std::vector<int>{16, 16});
    CHECK(cfg.stage1.minibatch == 128);  // untouched default
    CHECK(cfg.alpha == 1e-4);
    CHECK(cfg.noise.kind == NoiseKind::kNormGated);
    CHECK(cfg.grid_xi1 == std::vector<double>{0.5});
    CHECK(cfg.virtual_systems.size() == 8);  // untouched default
    std::filesystem::remove(path);
}

TEST_CASE("config validation rejects bad input") {
    // xi outside the region
    {
        RunConfig cfg = default_config();
        cfg.virtual_systems[9] = {2.0, 20.0};
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    {
        RunConfig cfg = default_config();
        cfg.xi_real = {0.5, 100.0};
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    // non-PD reward matrices
    {
        RunConfig cfg = default_config();
        cfg.reward.r1(1, 1) = -0.1;
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    {
        RunConfig cfg = default_config();
        cfg.reward.r1(0, 1) = 0.5;  // asymmetric
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    {
        RunConfig cfg = default_config();
        cfg.reward.r2(0, 0) = 0.0;
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    // structural problems
    {
        RunConfig cfg = default_config();
        cfg.stage1.gamma = 1.0;
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    {
        RunConfig cfg = default_config();
        cfg.stage1.tau = 0.0;
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    {
        RunConfig cfg = default_config();
        cfg.grid_xi2.push_back(200.0);
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }
    {
        RunConfig cfg = default_config();
        cfg.x0 = {0.0};
        CHECK_THROWS_AS(validate(cfg), ConfigError);
    }

    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
    const auto bad = write_temp_config("{ not json");
    CHECK_THROWS_AS(load_config(bad), ConfigError);
    std::filesystem::remove(bad);
}

TEST_CASE("config snapshot is deterministic and loadable") {
    RunConfig cfg = default_config();
    cfg.seed = 123;
    const std::string snap1 = config_snapshot(cfg);
    const std::string snap2 = config_snapshot(cfg);
    CHECK(snap1 == snap2);

    const auto path = write_temp_config(snap1);
    const RunConfig loaded = load_config(path);
    CHECK(loaded.seed == 123);
    CHECK(config_snapshot(loaded) == snap1);  // fixed point
    std::filesystem::remove(path);
}

TEST_CASE("stage1_for_system applies per-system step size and derived seed") {
    RunConfig cfg = default_config();
    cfg.seed = 5;
    const Stage1Config s1 = stage1_for_system(cfg, 1);
    CHECK(s1.adam_step_size == 5e-4);
    CHECK(s1.seed == derive_seed(5, 1));
    const Stage1Config s2 = stage1_for_system(cfg, 2);
    CHECK(s2.adam_step_size == 5e-5);
    CHECK(s2.seed == derive_seed(5, 2));
    CHECK(s1.seed != s2.seed);

    cfg.step_sizes.erase(3);
    const Stage1Config s3 = stage1_for_system(cfg, 3);
    CHECK(s3.adam_step_size == cfg.default_step_size);
}

TEST_CASE("model filenames") {
    CHECK(model_filename(1) == "model_sys1.nafq");
    CHECK(model_filename(12) == "model_sys12.nafq");
}
