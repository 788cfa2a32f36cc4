// Command-line front end for the two-stage stabilization pipeline:
// pre-train NAF Q-functions on virtual systems, adapt their simplex-weighted
// ensemble online against a real system, sweep parameter grids, export
// policy surfaces and score traces as CSV.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "nafstab/config.hpp"
#include "nafstab/csv.hpp"
#include "nafstab/ensemble.hpp"
#include "nafstab/errors.hpp"
#include "nafstab/evalkit.hpp"
#include "nafstab/stage1.hpp"

namespace fs = std::filesystem;
using namespace nafstab;

namespace {

const std::map<std::string, std::vector<int>> kBasisCases = {
    {"case-1", {1, 2, 3, 4}}, {"case-2", {5, 6, 7, 8}}, {"case-3", {1, 6, 7, 8}},
    {"case-4", {5, 2, 7, 8}}, {"case-5", {1, 2, 7, 8}},
};

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string models_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool desk_scale = false;
    int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file (fields override built-in defaults)");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--models", opts.models_dir, "directory holding pretrained model files (default: out)");
    cmd->add_option("--seed", opts.seed, "base seed")->each([&](const std::string&) { opts.seed_set = true; });
    cmd->add_flag("--desk-scale", opts.desk_scale, "small-network preset (2x64 hidden, 500 episodes)");
    cmd->add_option("--threads", opts.threads, "worker threads for independent runs")->check(CLI::PositiveNumber);
}

RunConfig make_config(const CommonOpts& opts) {
    RunConfig cfg = opts.config_path.empty() ? default_config() : load_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    if (opts.desk_scale) apply_desk_scale(cfg);
    validate(cfg);
    return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    std::ofstream snap(dir / "config.json", std::ios::binary);
    snap << config_snapshot(cfg);
    return dir;
}

fs::path models_dir(const CommonOpts& opts, const RunConfig& cfg) {
    return opts.models_dir.empty() ? fs::path(cfg.out_dir) : fs::path(opts.models_dir);
}

QModel load_member(const fs::path& dir, int id) {
    const fs::path path = dir / model_filename(id);
    try {
        return load_model(path.string());
    } catch (const std::exception& e) {
        throw ConfigError("cannot load model for system " + std::to_string(id) + ": " + e.what());
    }
}

std::vector<std::shared_ptr<const NafBasis>> load_basis(const fs::path& dir, const std::vector<int>& ids) {
    if (ids.empty()) throw ConfigError("basis must not be empty");
    std::vector<std::shared_ptr<const NafBasis>> members;
    members.reserve(ids.size());
    for (int id : ids) members.push_back(std::make_shared<QModelBasis>(load_member(dir, id)));
    return members;
}

Policy member_policy(std::shared_ptr<const QModel> model) {
    return [model](std::span<const double> x) {
        NafEval e;
        naf_eval_into(*model, Which::kMain, x, e);
        return e.mu;
    };
}

Policy ensemble_policy(QEnsemble ensemble) {
    return [ensemble = std::move(ensemble)](std::span<const double> x) {
        return greedy_action(ensemble, x);
    };
}

QEnsemble build_ensemble(const RunConfig& cfg, const fs::path& dir, const std::vector<int>& ids,
                         const std::vector<double>& weights) {
    QEnsemble e = make_ensemble(load_basis(dir, ids), cfg.eta, cfg.eps_w, cfg.alpha, cfg.stage2_gamma);
    if (!weights.empty()) {
        if (weights.size() != e.w.size()) throw ConfigError("--weights length must match basis size");
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ConfigError("--weights entries must be nonnegative");
            sum += w;
        }
        if (sum <= 0.0) throw ConfigError("--weights must not be all zero");
        for (std::size_t i = 0; i < weights.size(); ++i) e.w[i] = weights[i] / sum;
    }
    return e;
}

int cmd_pretrain(const CommonOpts& opts, std::vector<int> systems, const std::string& preset) {
    RunConfig cfg = make_config(opts);
    if (preset == "paper-8") {
        systems.clear();
        for (const auto& [id, xi] : cfg.virtual_systems) systems.push_back(id);
    } else if (!preset.empty()) {
        throw ConfigError("unknown preset: " + preset);
    }
    for (int id : systems)
        if (!cfg.virtual_systems.count(id)) throw ConfigError("unknown virtual system id: " + std::to_string(id));
    const fs::path dir = prepare_out_dir(cfg);
    if (systems.empty()) return 0;

    std::atomic<std::size_t> next{0};
    std::atomic<bool> diverged{false};
    std::mutex io_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= systems.size() || diverged.load()) return;
            const int id = systems[i];
            try {
                PlantSpec spec = cfg.plant;
                spec.xi = cfg.virtual_systems.at(id);
                const Stage1Config s1 = stage1_for_system(cfg, id);
                const TrainResult result = train(spec, cfg.reward, s1);
                save_model(result.model, (dir / model_filename(id)).string());
                std::ofstream log(dir / ("train_sys" + std::to_string(id) + ".csv"), std::ios::binary);
                write_train_log_csv(log, result.log);
                std::lock_guard<std::mutex> lk(io_mutex);
                std::cout << "trained system " << id << " (xi = " << spec.xi[0] << ", " << spec.xi[1]
                          << "), final episode return " << result.log.back().ret << "\n";
            } catch (...) {
                std::lock_guard<std::mutex> lk(io_mutex);
                if (!first_error) first_error = std::current_exception();
                diverged.store(true);
                return;
            }
        }
    };
    const int n = std::min<int>(opts.threads, static_cast<int>(systems.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);
    return 0;
}

int cmd_online(const CommonOpts& opts, const std::vector<int>& basis, const std::vector<double>& xi,
               const std::string& ramp, const std::string& noise_kind) {
    RunConfig cfg = make_config(opts);
    if (!xi.empty()) {
        if (xi.size() != 2) throw ConfigError("--xi needs two values");
        cfg.xi_real = xi;
    }
    if (!noise_kind.empty()) {
        if (noise_kind == "decay") cfg.noise.kind = NoiseKind::kDecay;
        else if (noise_kind == "norm-gated") cfg.noise.kind = NoiseKind::kNormGated;
        else if (noise_kind == "none") cfg.noise.kind = NoiseKind::kNone;
        else throw ConfigError("unknown noise kind: " + noise_kind);
    }
    validate(cfg);
    const fs::path dir = prepare_out_dir(cfg);

    QEnsemble ensemble = build_ensemble(cfg, models_dir(opts, cfg), basis, {});
    PlantSpec spec = cfg.plant;
    spec.xi = cfg.xi_real;

    OnlineRunConfig run;
    run.steps = cfg.online_steps;
    run.noise = cfg.noise;
    run.x0 = cfg.x0;
    run.seed = cfg.seed;
    if (ramp == "up") {
        run.schedule = cfg.schedule;
    } else if (ramp == "down") {
        XiSchedule sched = cfg.schedule;
        std::swap(sched.xi2_from, sched.xi2_to);
        run.schedule = sched;
    } else if (!ramp.empty()) {
        throw ConfigError("--ramp must be 'up' or 'down'");
    }
    if (run.schedule) spec.xi = schedule_xi(*run.schedule, 0);

    const OnlineLog log = online_run(ensemble, spec, cfg.reward, run);
    std::ofstream os(dir / "online.csv", std::ios::binary);
    write_online_log_csv(os, log, cfg.plant.state_dim, cfg.plant.action_dim,
                         static_cast<int>(ensemble.members.size()));
    if (log.skipped_updates > 0)
        std::cerr << "warning: " << log.skipped_updates << " weight updates skipped (halving cap)\n";
    std::cout << "online run: " << log.records.size() << " steps, cumulative reward "
              << fmt_double(log.total_reward()) << ", final w =";
    for (double w : ensemble.w) std::cout << ' ' << fmt_double(w);
    std::cout << "\n";
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::vector<int>& basis, int member, const std::string& case_name) {
    RunConfig cfg = make_config(opts);
    const fs::path dir = prepare_out_dir(cfg);
    const fs::path mdir = models_dir(opts, cfg);

    std::vector<int> ids = basis;
    if (!case_name.empty()) {
        const auto it = kBasisCases.find(case_name);
        if (it == kBasisCases.end()) throw ConfigError("unknown case: " + case_name);
        ids = it->second;
    }

    SweepGrid grid;
    if (member > 0) {
        auto model = std::make_shared<QModel>(load_member(mdir, member));
        grid = sweep_policy(member_policy(model), cfg.plant, cfg.reward, cfg.grid_xi1, cfg.grid_xi2, cfg.x0,
                            opts.threads);
    } else {
        if (ids.empty()) throw ConfigError("sweep needs --basis, --case, or --member");
        const auto members = load_basis(mdir, ids);
        auto make = [&cfg, members]() {
            return make_ensemble(members, cfg.eta, cfg.eps_w, cfg.alpha, cfg.stage2_gamma);
        };
        OnlineRunConfig run;
        run.steps = cfg.online_steps;
        run.noise = cfg.noise;
        run.x0 = cfg.x0;
        grid = sweep_online(make, cfg.plant, cfg.reward, cfg.grid_xi1, cfg.grid_xi2, run, cfg.seed,
                            opts.threads);
    }

    std::ofstream os(dir / "sweep.csv", std::ios::binary);
    write_sweep_csv(os, grid);
    int successes = 0;
    for (double s : grid.scores) successes += s >= kSuccessThreshold ? 1 : 0;
    std::cout << "sweep: " << successes << "/" << grid.scores.size() << " cells succeeded (score >= "
              << kSuccessThreshold << ")\n";
    return 0;
}

int cmd_surface(const CommonOpts& opts, const std::vector<int>& basis, int member,
                const std::vector<double>& weights) {
    RunConfig cfg = make_config(opts);
    const fs::path dir = prepare_out_dir(cfg);
    const fs::path mdir = models_dir(opts, cfg);

    Policy policy;
    if (member > 0) {
        policy = member_policy(std::make_shared<QModel>(load_member(mdir, member)));
    } else if (!basis.empty()) {
        policy = ensemble_policy(build_ensemble(cfg, mdir, basis, weights));
    } else {
        throw ConfigError("surface needs --member or --basis");
    }
    const SurfaceGrid grid = policy_surface(policy, cfg.surface_x1s, cfg.surface_x2s);
    std::ofstream os(dir / "surface.csv", std::ios::binary);
    write_surface_csv(os, grid);
    std::cout << "surface: " << grid.x1s.size() << " x " << grid.x2s.size() << " grid written\n";
    return 0;
}

int cmd_score(const CommonOpts& opts, const std::vector<int>& basis, int member,
              const std::vector<double>& weights, const std::vector<double>& xi) {
    RunConfig cfg = make_config(opts);
    if (!xi.empty()) {
        if (xi.size() != 2) throw ConfigError("--xi needs two values");
        cfg.xi_real = xi;
    }
    if (!cfg.region.contains(cfg.xi_real)) throw ConfigError("score: xi lies outside the region");
    const fs::path dir = prepare_out_dir(cfg);
    const fs::path mdir = models_dir(opts, cfg);

    Policy policy;
    if (member > 0) {
        policy = member_policy(std::make_shared<QModel>(load_member(mdir, member)));
    } else if (!basis.empty()) {
        policy = ensemble_policy(build_ensemble(cfg, mdir, basis, weights));
    } else {
        throw ConfigError("score needs --member or --basis");
    }
    const ScoreReport report = score_policy(policy, cfg.plant, cfg.reward, cfg.xi_real, cfg.x0);
    std::ofstream os(dir / "score.csv", std::ios::binary);
    write_score_csv(os, report);
    std::cout << "score(xi = " << report.xi[0] << ", " << report.xi[1] << ") = " << fmt_double(report.score)
              << (report.success ? " (success)" : " (failure)") << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-stage NAF Q-learning for stabilization under parameter uncertainty"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::vector<int> systems, basis;
    std::vector<double> xi, weights;
    std::string preset, ramp, noise_kind, case_name;
    int member = 0;

    auto* pre = app.add_subcommand("pretrain", "train one model per virtual system");
    add_common(pre, opts);
    pre->add_option("--systems", systems, "virtual system ids")->delimiter(',');
    pre->add_option("--preset", preset, "'paper-8' trains all eight benchmark systems");

    auto* onl = app.add_subcommand("online", "adapt ensemble weights online against the real system");
    add_common(onl, opts);
    onl->add_option("--basis", basis, "pretrained member ids")->delimiter(',')->required();
    onl->add_option("--xi", xi, "real system parameters xi1,xi2")->delimiter(',');
    onl->add_option("--ramp", ramp, "'up' (5->50) or 'down' (50->5) xi2 schedule");
    onl->add_option("--noise", noise_kind, "decay | norm-gated | none");

    auto* swp = app.add_subcommand("sweep", "score grid over the parameter region");
    add_common(swp, opts);
    swp->add_option("--basis", basis, "online adaptation per cell with these members")->delimiter(',');
    swp->add_option("--case", case_name, "named basis choice (case-1 .. case-5)");
    swp->add_option("--member", member, "fixed pretrained policy to score per cell");

    auto* srf = app.add_subcommand("surface", "greedy action over a state grid");
    add_common(srf, opts);
    srf->add_option("--member", member, "pretrained member id");
    srf->add_option("--basis", basis, "ensemble member ids")->delimiter(',');
    srf->add_option("--weights", weights, "fixed ensemble weights (normalized)")->delimiter(',');

    auto* sco = app.add_subcommand("score", "noiseless greedy rollout score from x0");
    add_common(sco, opts);
    sco->add_option("--member", member, "pretrained member id");
    sco->add_option("--basis", basis, "ensemble member ids")->delimiter(',');
    sco->add_option("--weights", weights, "fixed ensemble weights (normalized)")->delimiter(',');
    sco->add_option("--xi", xi, "system parameters xi1,xi2")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (pre->parsed()) return cmd_pretrain(opts, systems, preset);
        if (onl->parsed()) return cmd_online(opts, basis, xi, ramp, noise_kind);
        if (swp->parsed()) return cmd_sweep(opts, basis, member, case_name);
        if (srf->parsed()) return cmd_surface(opts, basis, member, weights);
        if (sco->parsed()) return cmd_score(opts, basis, member, weights, xi);
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
