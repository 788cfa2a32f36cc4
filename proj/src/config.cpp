#include "nafstab/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

namespace nafstab {

namespace {

using nlohmann::json;

Mat mat_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw ConfigError("config: matrix must be a non-empty array of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols) throw ConfigError("config: ragged matrix");
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "decay") return NoiseKind::kDecay;
    if (s == "norm-gated") return NoiseKind::kNormGated;
    if (s == "none") return NoiseKind::kNone;
    throw ConfigError("config: unknown noise kind: " + s);
}

std::string noise_kind_to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::kDecay: return "decay";
        case NoiseKind::kNormGated: return "norm-gated";
        case NoiseKind::kNone: return "none";
    }
    return "decay";
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_json(RunConfig& cfg, const json& j) {
    maybe(j, "seed", cfg.seed);
    maybe(j, "out", cfg.out_dir);

    if (j.contains("plant")) {
        const json& p = j.at("plant");
        maybe(p, "dynamics", cfg.plant.dynamics);
        maybe(p, "gravity", cfg.plant.gravity);
        maybe(p, "dt", cfg.plant.dt);
        maybe(p, "target", cfg.plant.target);
        maybe(p, "action_low", cfg.plant.action_box.lo);
        maybe(p, "action_high", cfg.plant.action_box.hi);
        if (p.contains("region")) {
            cfg.region.intervals.clear();
            for (const auto& iv : p.at("region"))
                cfg.region.intervals.push_back({iv[0].get<double>(), iv[1].get<double>()});
        }
        cfg.plant.state_dim = static_cast<int>(cfg.plant.target.size());
        cfg.plant.action_dim = static_cast<int>(cfg.plant.action_box.lo.size());
    }

    if (j.contains("reward")) {
        const json& r = j.at("reward");
        if (r.contains("R1")) cfg.reward.r1 = mat_from_json(r.at("R1"));
        if (r.contains("R2")) cfg.reward.r2 = mat_from_json(r.at("R2"));
        maybe(r, "target", cfg.reward.target);
    }

    if (j.contains("virtual_systems")) {
        cfg.virtual_systems.clear();
        for (const auto& [key, value] : j.at("virtual_systems").items())
            cfg.virtual_systems[std::stoi(key)] = value.get<std::vector<double>>();
    }

    if (j.contains("stage1")) {
        const json& s = j.at("stage1");
        maybe(s, "hidden", cfg.stage1.naf.hidden);
        maybe(s, "episodes", cfg.stage1.episodes);
        maybe(s, "steps_per_episode", cfg.stage1.steps_per_episode);
        maybe(s, "minibatch", cfg.stage1.minibatch);
        maybe(s, "gamma", cfg.stage1.gamma);
        maybe(s, "tau", cfg.stage1.tau);
        maybe(s, "buffer_capacity", cfg.stage1.buffer_capacity);
        maybe(s, "warmup", cfg.stage1.warmup);
        maybe(s, "init_low", cfg.stage1.init_box.lo);
        maybe(s, "init_high", cfg.stage1.init_box.hi);
        if (s.contains("ou")) {
            const auto ou = s.at("ou").get<std::vector<double>>();
            if (ou.size() != 3) throw ConfigError("config: stage1.ou must have three entries");
            cfg.stage1.ou.p1 = ou[0];
            cfg.stage1.ou.p2 = ou[1];
            cfg.stage1.ou.p3 = ou[2];
        }
        if (s.contains("train_state_bound")) {
            const double b = s.at("train_state_bound").get<double>();
            cfg.stage1.train_state_bound = b > 0.0 ? b : std::numeric_limits<double>::infinity();
        }
        maybe(s, "reward_scale", cfg.stage1.reward_scale);
        maybe(s, "eval_every", cfg.stage1.eval_every);
        maybe(s, "eval_horizon", cfg.stage1.eval_horizon);
        maybe(s, "probe_x0", cfg.stage1.probe_x0);
        maybe(s, "default_step_size", cfg.default_step_size);
        if (s.contains("step_sizes")) {
            cfg.step_sizes.clear();
            for (const auto& [key, value] : s.at("step_sizes").items())
                cfg.step_sizes[std::stoi(key)] = value.get<double>();
        }
    }

    if (j.contains("stage2")) {
        const json& s = j.at("stage2");
        maybe(s, "eta", cfg.eta);
        maybe(s, "eps_w", cfg.eps_w);
        maybe(s, "alpha", cfg.alpha);
        maybe(s, "gamma", cfg.stage2_gamma);
        maybe(s, "steps", cfg.online_steps);
        maybe(s, "x0", cfg.x0);
        maybe(s, "xi", cfg.xi_real);
        if (s.contains("noise")) {
            const json& n = s.at("noise");
            if (n.contains("kind")) cfg.noise.kind = noise_kind_from_string(n.at("kind").get<std::string>());
            maybe(n, "scale", cfg.noise.scale);
            maybe(n, "horizon", cfg.noise.horizon);
            maybe(n, "gate", cfg.noise.gate);
        }
        if (s.contains("schedule")) {
            const json& sc = s.at("schedule");
            maybe(sc, "xi1", cfg.schedule.xi1);
            maybe(sc, "from", cfg.schedule.xi2_from);
            maybe(sc, "to", cfg.schedule.xi2_to);
            maybe(sc, "ramp_steps", cfg.schedule.ramp_steps);
        }
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        maybe(e, "xi1", cfg.grid_xi1);
        maybe(e, "xi2", cfg.grid_xi2);
        if (e.contains("surface")) {
            const json& s = e.at("surface");
            maybe(s, "x1", cfg.surface_x1s);
            maybe(s, "x2", cfg.surface_x2s);
        }
    }
}

std::vector<double> linspace_points(double lo, double hi, int points) {
    std::vector<double> out;
    out.reserve(points);
    for (int i = 0; i < points; ++i)
        out.push_back(points == 1 ? lo : lo + (hi - lo) * i / (points - 1));
    return out;
}

}  // namespace

RunConfig default_config() {
    RunConfig cfg;
    cfg.plant = PlantSpec{};
    cfg.plant.xi.clear();
    cfg.region.intervals = {{0.0, 1.0}, {5.0, 50.0}};

    cfg.reward.r1 = Mat(2, 2);
    cfg.reward.r1(0, 0) = 1.0;
    cfg.reward.r1(1, 1) = 0.1;
    cfg.reward.r2 = Mat(1, 1);
    cfg.reward.r2(0, 0) = 10.0;
    cfg.reward.target = {0.0, 0.0};

    cfg.virtual_systems = {
        {1, {0.0, 5.0}},  {2, {1.0, 5.0}},  {3, {0.0, 50.0}}, {4, {1.0, 50.0}},
        {5, {0.4, 16.0}}, {6, {0.6, 16.0}}, {7, {0.4, 32.0}}, {8, {0.6, 32.0}},
    };

    cfg.stage1.naf = NafConfig{2, 1, {128, 128, 128, 128}};
    cfg.stage1.episodes = 1000;
    cfg.stage1.steps_per_episode = 200;
    cfg.stage1.minibatch = 128;
    cfg.stage1.gamma = 0.99;
    cfg.stage1.tau = 0.005;
    cfg.stage1.buffer_capacity = 1'000'000;
    cfg.stage1.warmup = 128;
    cfg.stage1.init_box = Box{{-std::numbers::pi, -8.0}, {std::numbers::pi, 8.0}};
    cfg.stage1.eval_every = 25;
    cfg.stage1.probe_x0 = {std::numbers::pi, 0.0};
    cfg.step_sizes = {{1, 5e-4}, {2, 5e-5}, {3, 1e-4}, {4, 1e-4},
                      {5, 5e-5}, {6, 5e-5}, {7, 1e-4}, {8, 1e-4}};
    cfg.default_step_size = 1e-4;

    cfg.x0 = {std::numbers::pi, 0.0};
    cfg.xi_real = {0.95, 5.5};
    cfg.schedule = XiSchedule{1.0, 5.0, 50.0, 200};

    cfg.grid_xi1 = linspace_step(0.05, 0.95, 0.1);
    cfg.grid_xi2 = linspace_step(5.5, 49.5, 1.0);
    cfg.surface_x1s = linspace_points(-std::numbers::pi, std::numbers::pi, 65);
    cfg.surface_x2s = linspace_points(-8.0, 8.0, 65);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config: parse error in " + path + ": " + e.what());
    }
    RunConfig cfg = default_config();
    try {
        apply_json(cfg, j);
    } catch (const json::exception& e) {
        throw ConfigError("config: bad field in " + path + ": " + e.what());
    }
    return cfg;
}

void apply_desk_scale(RunConfig& cfg) {
    cfg.stage1.naf.hidden = {64, 64};
    cfg.stage1.episodes = 500;
    cfg.stage1.train_state_bound = 12.0;
}

void validate(const RunConfig& cfg) {
    const int nx = cfg.plant.state_dim, na = cfg.plant.action_dim;
    if (nx < 1 || na < 1) throw ConfigError("config: state/action dims must be >= 1");
    if (static_cast<int>(cfg.plant.target.size()) != nx) throw ConfigError("config: target dimension mismatch");
    if (static_cast<int>(cfg.plant.action_box.lo.size()) != na ||
        static_cast<int>(cfg.plant.action_box.hi.size()) != na)
        throw ConfigError("config: action box dimension mismatch");
    for (int i = 0; i < na; ++i)
        if (!(cfg.plant.action_box.lo[i] <= cfg.plant.action_box.hi[i]))
            throw ConfigError("config: empty action box");
    for (const auto& iv : cfg.region.intervals)
        if (!(iv[0] <= iv[1])) throw ConfigError("config: empty parameter region interval");

    if (cfg.reward.r1.rows() != nx || cfg.reward.r1.cols() != nx)
        throw ConfigError("config: R1 must be state_dim x state_dim");
    if (cfg.reward.r2.rows() != na || cfg.reward.r2.cols() != na)
        throw ConfigError("config: R2 must be action_dim x action_dim");
    if (!is_positive_definite(cfg.reward.r1)) throw ConfigError("config: R1 is not symmetric positive definite");
    if (!is_positive_definite(cfg.reward.r2)) throw ConfigError("config: R2 is not symmetric positive definite");

    for (const auto& [id, xi] : cfg.virtual_systems) {
        if (!cfg.region.contains(xi))
            throw ConfigError("config: virtual system " + std::to_string(id) + " lies outside the region");
    }
    if (!cfg.xi_real.empty() && !cfg.region.contains(cfg.xi_real))
        throw ConfigError("config: stage2.xi lies outside the region");
    for (double v1 : cfg.grid_xi1)
        for (double v2 : cfg.grid_xi2)
            if (!cfg.region.contains(std::vector<double>{v1, v2}))
                throw ConfigError("config: evaluation grid leaves the region");

    if (cfg.stage1.naf.n_x != nx || cfg.stage1.naf.n_a != na)
        throw ConfigError("config: stage1 network dims do not match the plant");
    for (int h : cfg.stage1.naf.hidden)
        if (h < 1) throw ConfigError("config: hidden layer sizes must be >= 1");
    if (cfg.stage1.episodes < 0 || cfg.stage1.steps_per_episode < 0)
        throw ConfigError("config: negative stage1 counts");
    if (cfg.stage1.minibatch < 1) throw ConfigError("config: minibatch must be >= 1");
    if (!(cfg.stage1.gamma > 0.0 && cfg.stage1.gamma < 1.0)) throw ConfigError("config: stage1 gamma out of (0,1)");
    if (!(cfg.stage1.tau > 0.0 && cfg.stage1.tau <= 1.0)) throw ConfigError("config: tau out of (0,1]");
    if (cfg.stage1.buffer_capacity < 1) throw ConfigError("config: buffer capacity must be >= 1");
    if (static_cast<int>(cfg.stage1.init_box.lo.size()) != nx ||
        static_cast<int>(cfg.stage1.init_box.hi.size()) != nx)
        throw ConfigError("config: init box dimension mismatch");
    if (cfg.default_step_size <= 0.0) throw ConfigError("config: default step size must be positive");
    if (!(cfg.stage1.reward_scale > 0.0)) throw ConfigError("config: reward scale must be positive");
    for (const auto& [id, s] : cfg.step_sizes)
        if (s <= 0.0) throw ConfigError("config: step size for system " + std::to_string(id) + " must be positive");

    if (cfg.eta < 0.0 || cfg.eps_w <= 0.0 || cfg.alpha < 0.0)
        throw ConfigError("config: stage2 constants out of range");
    if (!(cfg.stage2_gamma >= 0.0 && cfg.stage2_gamma < 1.0)) throw ConfigError("config: stage2 gamma out of [0,1)");
    if (cfg.online_steps < 0) throw ConfigError("config: stage2 steps must be >= 0");
    if (static_cast<int>(cfg.x0.size()) != nx) throw ConfigError("config: stage2 x0 dimension mismatch");
}

std::string config_snapshot(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out"] = cfg.out_dir;
    j["plant"] = {{"dynamics", cfg.plant.dynamics},
                  {"gravity", cfg.plant.gravity},
                  {"dt", cfg.plant.dt},
                  {"target", cfg.plant.target},
                  {"action_low", cfg.plant.action_box.lo},
                  {"action_high", cfg.plant.action_box.hi}};
    json region = json::array();
    for (const auto& iv : cfg.region.intervals) region.push_back({iv[0], iv[1]});
    j["plant"]["region"] = region;
    j["reward"] = {{"R1", mat_to_json(cfg.reward.r1)}, {"R2", mat_to_json(cfg.reward.r2)},
                   {"target", cfg.reward.target}};
    json vs;
    for (const auto& [id, xi] : cfg.virtual_systems) vs[std::to_string(id)] = xi;
    j["virtual_systems"] = vs;
    json steps;
    for (const auto& [id, s] : cfg.step_sizes) steps[std::to_string(id)] = s;
    j["stage1"] = {{"hidden", cfg.stage1.naf.hidden},
                   {"episodes", cfg.stage1.episodes},
                   {"steps_per_episode", cfg.stage1.steps_per_episode},
                   {"minibatch", cfg.stage1.minibatch},
                   {"gamma", cfg.stage1.gamma},
                   {"tau", cfg.stage1.tau},
                   {"buffer_capacity", cfg.stage1.buffer_capacity},
                   {"warmup", cfg.stage1.warmup},
                   {"init_low", cfg.stage1.init_box.lo},
                   {"init_high", cfg.stage1.init_box.hi},
                   {"ou", {cfg.stage1.ou.p1, cfg.stage1.ou.p2, cfg.stage1.ou.p3}},
                   {"step_sizes", steps},
                   {"default_step_size", cfg.default_step_size},
                   {"train_state_bound",
                    std::isfinite(cfg.stage1.train_state_bound) ? cfg.stage1.train_state_bound : 0.0},
                   {"reward_scale", cfg.stage1.reward_scale},
                   {"eval_every", cfg.stage1.eval_every},
                   {"eval_horizon", cfg.stage1.eval_horizon},
                   {"probe_x0", cfg.stage1.probe_x0}};
    j["stage2"] = {{"eta", cfg.eta},
                   {"eps_w", cfg.eps_w},
                   {"alpha", cfg.alpha},
                   {"gamma", cfg.stage2_gamma},
                   {"steps", cfg.online_steps},
                   {"x0", cfg.x0},
                   {"xi", cfg.xi_real},
                   {"noise",
                    {{"kind", noise_kind_to_string(cfg.noise.kind)},
                     {"scale", cfg.noise.scale},
                     {"horizon", cfg.noise.horizon},
                     {"gate", cfg.noise.gate}}},
                   {"schedule",
                    {{"xi1", cfg.schedule.xi1},
                     {"from", cfg.schedule.xi2_from},
                     {"to", cfg.schedule.xi2_to},
                     {"ramp_steps", cfg.schedule.ramp_steps}}}};
    j["eval"] = {{"xi1", cfg.grid_xi1},
                 {"xi2", cfg.grid_xi2},
                 {"surface", {{"x1", cfg.surface_x1s}, {"x2", cfg.surface_x2s}}}};
    return j.dump(2) + "\n";
}

Stage1Config stage1_for_system(const RunConfig& cfg, int id) {
    Stage1Config s = cfg.stage1;
    const auto it = cfg.step_sizes.find(id);
    s.adam_step_size = it != cfg.step_sizes.end() ? it->second : cfg.default_step_size;
    s.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(id));
    return s;
}

std::string model_filename(int id) { return "model_sys" + std::to_string(id) + ".nafq"; }

}  // namespace nafstab
