#include "nafstab/stage1.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "nafstab/csv.hpp"
#include "nafstab/errors.hpp"

namespace nafstab {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : cap_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
    for (double v : e.x)
        if (!std::isfinite(v)) throw std::invalid_argument("ReplayBuffer: non-finite state");
    for (double v : e.a)
        if (!std::isfinite(v)) throw std::invalid_argument("ReplayBuffer: non-finite action");
    for (double v : e.x_next)
        if (!std::isfinite(v)) throw std::invalid_argument("ReplayBuffer: non-finite next state");
    if (!std::isfinite(e.r)) throw std::invalid_argument("ReplayBuffer: non-finite reward");

    if (data_.size() < cap_) {
        data_.push_back(std::move(e));
    } else {
        data_[next_] = std::move(e);  // FIFO eviction
        next_ = (next_ + 1) % cap_;
    }
    ++pushed_;
}

std::vector<const Experience*> ReplayBuffer::sample(std::size_t count, RngStream& rng) const {
    if (data_.size() < count)
        throw std::invalid_argument("ReplayBuffer: fewer experiences than requested sample");
    std::vector<const Experience*> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = &data_[static_cast<std::size_t>(rng.below(data_.size()))];
    return out;
}

const std::vector<double>& OuProcess::next(RngStream& rng) {
    for (double& e : eps) e = e + p1 * (p2 - e) + p3 * rng.gauss();
    return eps;
}

namespace {

// Noiseless greedy rollout score on the virtual system (probe for model
// selection); deterministic, touches no RNG stream.
double probe_score(const QModel& model, const PlantSpec& spec, const RewardSpec& rs,
                   std::span<const double> x0, int horizon) {
    NafEval eval;
    std::vector<double> x(x0.begin(), x0.end()), x_next;
    double g = 0.0;
    for (int k = 0; k <= horizon; ++k) {
        for (double v : x)
            if (!std::isfinite(v)) return -std::numeric_limits<double>::infinity();
        naf_eval_into(model, Which::kMain, x, eval);
        const auto a = clip_action(spec.action_box, eval.mu);
        g += reward(rs, x, a);
        if (k < horizon) {
            step_into(spec, x, a, x_next);
            x = x_next;
        }
    }
    return g;
}

}  // namespace

TrainResult train(const PlantSpec& spec, const RewardSpec& rs, const Stage1Config& cfg) {
    if (cfg.minibatch < 1) throw std::invalid_argument("train: minibatch must be positive");
    if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("train: gamma out of (0,1)");
    if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw std::invalid_argument("train: tau out of (0,1]");
    if (cfg.episodes < 0 || cfg.steps_per_episode < 0) throw std::invalid_argument("train: negative counts");
    if (static_cast<int>(cfg.init_box.lo.size()) != cfg.naf.n_x)
        throw std::invalid_argument("train: init box dimension mismatch");

    if (!(cfg.reward_scale > 0.0)) throw std::invalid_argument("train: reward scale must be positive");

    // Draw order per run: params from salt 1; everything else (initial
    // states, OU noise, minibatch indices) from one stream seeded by salt 2.
    TrainResult result;
    result.model = make_qmodel(cfg.naf, derive_seed(cfg.seed, 1));
    result.model.seed = cfg.seed;
    result.model.reward_scale = cfg.reward_scale;
    RngStream rng(derive_seed(cfg.seed, 2));

    QModel& model = result.model;
    ReplayBuffer buffer(cfg.buffer_capacity);
    AdamState adam(model.main.values.size(), AdamConfig{.step_size = cfg.adam_step_size});
    OuProcess ou = cfg.ou;
    const std::size_t update_threshold = std::max<std::size_t>(cfg.minibatch, cfg.warmup);

    if (cfg.eval_every > 0 && static_cast<int>(cfg.probe_x0.size()) != cfg.naf.n_x)
        throw std::invalid_argument("train: probe_x0 dimension mismatch");
    double best_probe = -std::numeric_limits<double>::infinity();
    NetParams best_main, best_target;

    NafEval eval;
    std::vector<double> x(cfg.naf.n_x), x_next;
    for (int episode = 0; episode < cfg.episodes; ++episode) {
        ou.reset(cfg.naf.n_a);
        for (int i = 0; i < cfg.naf.n_x; ++i) x[i] = rng.uniform(cfg.init_box.lo[i], cfg.init_box.hi[i]);

        double ret = 0.0, loss_sum = 0.0;
        int updates = 0;
        for (int k = 0; k < cfg.steps_per_episode; ++k) {
            naf_eval_into(model, Which::kMain, x, eval);
            const auto& noise = ou.next(rng);
            std::vector<double> a(cfg.naf.n_a);
            for (int i = 0; i < cfg.naf.n_a; ++i) a[i] = eval.mu[i] + noise[i];
            a = clip_action(spec.action_box, a);

            step_into(spec, x, a, x_next);
            const double r = reward(rs, x, a);
            ret += r;
            buffer.push(Experience{x, a, x_next, r * cfg.reward_scale});
            x = x_next;

            bool out_of_arena = false;
            for (double v : x) out_of_arena = out_of_arena || std::abs(v) > cfg.train_state_bound;
            if (out_of_arena) {
                for (int i = 0; i < cfg.naf.n_x; ++i)
                    x[i] = rng.uniform(cfg.init_box.lo[i], cfg.init_box.hi[i]);
                ou.reset(cfg.naf.n_a);
            }

            if (buffer.size() >= update_threshold) {
                const auto batch = buffer.sample(cfg.minibatch, rng);
                const BatchLoss bl = batch_loss_and_grad(model, batch, cfg.gamma);
                if (!std::isfinite(bl.loss))
                    throw DivergenceError("train: non-finite loss at episode " + std::to_string(episode));
                adam_step(model.main, bl.grad, adam);
                soft_update(model, cfg.tau);
                loss_sum += bl.loss;
                ++updates;
            }
        }

        for (double v : model.main.values)
            if (!std::isfinite(v))
                throw DivergenceError("train: non-finite parameters at episode " + std::to_string(episode));

        double norm = 0.0;
        for (double v : x) norm += v * v;
        // mean loss reported in true reward units
        const double mean_loss = updates > 0
                                     ? loss_sum / updates / (cfg.reward_scale * cfg.reward_scale)
                                     : 0.0;
        result.log.push_back({episode, ret, mean_loss, std::sqrt(norm)});

        if (cfg.eval_every > 0 && (episode + 1) % cfg.eval_every == 0) {
            const double g = probe_score(model, spec, rs, cfg.probe_x0, cfg.eval_horizon);
            if (g > best_probe) {
                best_probe = g;
                best_main = model.main;
                best_target = model.target;
            }
        }
    }
    if (cfg.eval_every > 0 && std::isfinite(best_probe)) {
        result.model.main = std::move(best_main);
        result.model.target = std::move(best_target);
    }
    return result;
}

void write_train_log_csv(std::ostream& os, const std::vector<EpisodeStats>& log) {
    os << "episode,return,mean_loss,final_state_norm\n";
    for (const auto& s : log) {
        os << s.episode << ',';
        csv_cell(os, s.ret);
        csv_cell(os, s.mean_loss);
        csv_cell(os, s.final_state_norm, true);
    }
}

}  // namespace nafstab
