#include "nafstab/evalkit.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "nafstab/csv.hpp"
#include "nafstab/errors.hpp"

namespace nafstab {

namespace {

// Runs cells [0, total) on `threads` workers; body(index) must only touch its
// own output slot. Results do not depend on the thread count.
void parallel_cells(std::size_t total, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || total <= 1) {
        for (std::size_t i = 0; i < total; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(total));
    pool.reserve(n);
    std::atomic<bool> failed{false};
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= total || failed.load()) return;
                try {
                    body(i);
                } catch (...) {
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error("sweep: a cell failed");
}

}  // namespace

ScoreReport score_policy(const Policy& policy, const PlantSpec& plant, const RewardSpec& rs,
                         std::span<const double> xi, std::span<const double> x0, int horizon) {
    PlantSpec spec = plant;
    spec.xi.assign(xi.begin(), xi.end());

    ScoreReport report;
    report.xi = spec.xi;
    std::vector<double> x(x0.begin(), x0.end()), x_next;
    double g = 0.0;
    for (int k = 0; k <= horizon; ++k) {
        bool finite = true;
        for (double v : x) finite = finite && std::isfinite(v);
        if (!finite) {
            report.finite = false;
            report.score = -std::numeric_limits<double>::infinity();
            report.success = false;
            return report;
        }
        const auto a = clip_action(spec.action_box, policy(x));
        g += reward(rs, x, a);
        ++report.terms;
        if (k < horizon) {
            step_into(spec, x, a, x_next);
            x = x_next;
        }
    }
    report.score = g;
    report.success = g >= kSuccessThreshold;
    return report;
}

SweepGrid sweep_policy(const Policy& policy, const PlantSpec& plant, const RewardSpec& rs,
                       std::span<const double> xi1s, std::span<const double> xi2s,
                       std::span<const double> x0, int threads) {
    SweepGrid grid;
    grid.xi1s.assign(xi1s.begin(), xi1s.end());
    grid.xi2s.assign(xi2s.begin(), xi2s.end());
    grid.scores.assign(grid.xi1s.size() * grid.xi2s.size(), 0.0);
    const std::vector<double> start(x0.begin(), x0.end());
    parallel_cells(grid.scores.size(), threads, [&](std::size_t idx) {
        const std::size_t i = idx / grid.xi2s.size(), j = idx % grid.xi2s.size();
        const std::vector<double> xi{grid.xi1s[i], grid.xi2s[j]};
        grid.scores[idx] = score_policy(policy, plant, rs, xi, start).score;
    });
    return grid;
}

SweepGrid sweep_online(const std::function<QEnsemble()>& make, const PlantSpec& plant, const RewardSpec& rs,
                       std::span<const double> xi1s, std::span<const double> xi2s,
                       const OnlineRunConfig& run_cfg, std::uint64_t base_seed, int threads) {
    SweepGrid grid;
    grid.xi1s.assign(xi1s.begin(), xi1s.end());
    grid.xi2s.assign(xi2s.begin(), xi2s.end());
    grid.scores.assign(grid.xi1s.size() * grid.xi2s.size(), 0.0);
    parallel_cells(grid.scores.size(), threads, [&](std::size_t idx) {
        const std::size_t i = idx / grid.xi2s.size(), j = idx % grid.xi2s.size();
        PlantSpec spec = plant;
        spec.xi = {grid.xi1s[i], grid.xi2s[j]};
        QEnsemble ensemble = make();
        OnlineRunConfig cell_cfg = run_cfg;
        cell_cfg.seed = derive_seed(derive_seed(base_seed, i), j);
        try {
            const OnlineLog log = online_run(ensemble, spec, rs, cell_cfg);
            grid.scores[idx] = log.total_reward();
        } catch (const DivergenceError&) {
            grid.scores[idx] = -std::numeric_limits<double>::infinity();
        }
    });
    return grid;
}

void write_sweep_csv(std::ostream& os, const SweepGrid& grid) {
    os << "xi1,xi2,score,success\n";
    for (std::size_t i = 0; i < grid.xi1s.size(); ++i) {
        for (std::size_t j = 0; j < grid.xi2s.size(); ++j) {
            const double s = grid.at(i, j);
            os << fmt_double(grid.xi1s[i]) << ',' << fmt_double(grid.xi2s[j]) << ',' << fmt_double(s) << ','
               << (s >= kSuccessThreshold ? 1 : 0) << "\n";
        }
    }
}

SurfaceGrid policy_surface(const Policy& policy, std::span<const double> x1s, std::span<const double> x2s) {
    SurfaceGrid grid;
    grid.x1s.assign(x1s.begin(), x1s.end());
    grid.x2s.assign(x2s.begin(), x2s.end());
    if (grid.x1s.empty() || grid.x2s.empty()) throw std::invalid_argument("policy_surface: empty grid");
    const auto first = policy(std::vector<double>{grid.x1s[0], grid.x2s[0]});
    grid.n_a = static_cast<int>(first.size());
    grid.actions.assign(grid.x1s.size() * grid.x2s.size() * grid.n_a, 0.0);
    for (std::size_t i = 0; i < grid.x1s.size(); ++i) {
        for (std::size_t j = 0; j < grid.x2s.size(); ++j) {
            const auto a = policy(std::vector<double>{grid.x1s[i], grid.x2s[j]});
            for (int c = 0; c < grid.n_a; ++c)
                grid.actions[(i * grid.x2s.size() + j) * grid.n_a + c] = a[c];
        }
    }
    return grid;
}

void write_surface_csv(std::ostream& os, const SurfaceGrid& grid) {
    os << "x1,x2";
    if (grid.n_a == 1) {
        os << ",action";
    } else {
        for (int c = 1; c <= grid.n_a; ++c) os << ",action" << c;
    }
    os << "\n";
    for (std::size_t i = 0; i < grid.x1s.size(); ++i) {
        for (std::size_t j = 0; j < grid.x2s.size(); ++j) {
            os << fmt_double(grid.x1s[i]) << ',' << fmt_double(grid.x2s[j]);
            for (int c = 0; c < grid.n_a; ++c)
                os << ',' << fmt_double(grid.actions[(i * grid.x2s.size() + j) * grid.n_a + c]);
            os << "\n";
        }
    }
}

void write_score_csv(std::ostream& os, const ScoreReport& report) {
    os << "xi1,xi2,score,success\n";
    os << fmt_double(report.xi[0]) << ',' << fmt_double(report.xi[1]) << ',' << fmt_double(report.score)
       << ',' << (report.success ? 1 : 0) << "\n";
}

std::vector<double> linspace_step(double lo, double hi, double step) {
    std::vector<double> out;
    for (double v = lo; v <= hi + 1e-9 * std::max(1.0, std::abs(hi)); v += step) out.push_back(v);
    return out;
}

}  // namespace nafstab
