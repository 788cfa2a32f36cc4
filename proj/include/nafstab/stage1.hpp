#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "nafstab/experience.hpp"
#include "nafstab/naf.hpp"
#include "nafstab/plant.hpp"
#include "nafstab/rng.hpp"

namespace nafstab {

// Ring buffer over experiences; oldest evicted first at capacity.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Experience e);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return cap_; }
    std::uint64_t total_pushed() const { return pushed_; }
    const Experience& at(std::size_t i) const { return data_[i]; }

    // Uniform with replacement across current contents. Throws if the buffer
    // holds fewer than count experiences.
    std::vector<const Experience*> sample(std::size_t count, RngStream& rng) const;

private:
    std::size_t cap_;
    std::size_t next_ = 0;
    std::uint64_t pushed_ = 0;
    std::vector<Experience> data_;
};

// Ornstein-Uhlenbeck exploration noise:
//   eps[k+1] = eps[k] + p1 (p2 - eps[k]) + p3 eps',   eps' ~ N(0, 1),
// reset to zero at every episode start.
struct OuProcess {
    double p1 = 0.15;
    double p2 = 0.0;
    double p3 = 0.3;
    std::vector<double> eps;

    void reset(int dim) { eps.assign(dim, 0.0); }
    const std::vector<double>& next(RngStream& rng);
};

struct Stage1Config {
    NafConfig naf;
    int episodes = 500;
    int steps_per_episode = 200;
    int minibatch = 128;
    double gamma = 0.99;
    double tau = 0.005;
    double adam_step_size = 5e-4;
    std::size_t buffer_capacity = 1'000'000;
    std::size_t warmup = 128;  // gradient updates start once size >= max(minibatch, warmup)
    Box init_box;              // episode initial-state sampling box
    OuProcess ou;              // parameters only; state is reset per episode
    // Once any |x_i| exceeds this bound the state is redrawn from init_box
    // and the noise process restarts (the boundary transition still
    // bootstraps normally); the episode keeps its remaining step budget.
    // Keeps exploration data inside a compact region; infinity disables it.
    double train_state_bound = std::numeric_limits<double>::infinity();
    // Rewards are multiplied by this factor inside the TD loss (the model
    // then represents reward_scale * Q; greedy actions are unchanged).
    double reward_scale = 0.01;
    // Simulator-side model selection: every eval_every episodes the greedy
    // policy is rolled out noiselessly from probe_x0 on the virtual system
    // and the best-scoring parameter snapshot is returned. 0 disables it and
    // the final parameters are returned instead.
    int eval_every = 0;
    int eval_horizon = 1000;  // rewards accumulated for k = 0..horizon
    std::vector<double> probe_x0;
    std::uint64_t seed = 0;
};

struct EpisodeStats {
    int episode = 0;
    double ret = 0.0;
    double mean_loss = 0.0;
    double final_state_norm = 0.0;
};

struct TrainResult {
    QModel model;
    std::vector<EpisodeStats> log;
};

// Continuous deep Q-learning against one virtual system: per step, act with
// mu(x) + OU noise, clip, step the plant, store the experience, minimize the
// TD loss on a uniform minibatch with Adam, soft-update the target network.
// Fully reproducible for a fixed seed. Throws DivergenceError if the loss or
// parameters become non-finite.
TrainResult train(const PlantSpec& spec, const RewardSpec& rs, const Stage1Config& cfg);

void write_train_log_csv(std::ostream& os, const std::vector<EpisodeStats>& log);

}  // namespace nafstab
