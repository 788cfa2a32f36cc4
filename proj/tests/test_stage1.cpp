#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nafstab/stage1.hpp"
#include "test_util.hpp"

using namespace nafstab;

namespace {

Experience make_exp(double tag) {
    return Experience{{tag, 0.0}, {0.0}, {tag, 1.0}, -tag};
}

PlantSpec benchmark(double xi1, double xi2) {
    PlantSpec spec;
    spec.xi = {xi1, xi2};
    return spec;
}

RewardSpec benchmark_reward() {
    RewardSpec rs;
    rs.r1 = Mat(2, 2);
    rs.r1(0, 0) = 1.0;
    rs.r1(1, 1) = 0.1;
    rs.r2 = Mat(1, 1);
    rs.r2(0, 0) = 10.0;
    rs.target = {0.0, 0.0};
    return rs;
}

Stage1Config tiny_config(std::uint64_t seed) {
    Stage1Config cfg;
    cfg.naf = NafConfig{2, 1, {16, 16}};
    cfg.episodes = 3;
    cfg.steps_per_episode = 40;
    cfg.minibatch = 16;
    cfg.warmup = 16;
    cfg.adam_step_size = 1e-3;
    cfg.buffer_capacity = 1000;
    cfg.init_box = Box{{-std::numbers::pi, -8.0}, {std::numbers::pi, 8.0}};
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("replay buffer evicts FIFO at capacity") {
    ReplayBuffer b(2);
    b.push(make_exp(1.0));
    b.push(make_exp(2.0));
    CHECK(b.size() == 2);
    b.push(make_exp(3.0));
    CHECK(b.size() == 2);
    CHECK(b.total_pushed() == 3);

    bool saw1 = false;
    for (std::size_t i = 0; i < b.size(); ++i) saw1 = saw1 || b.at(i).x[0] == 1.0;
    CHECK(!saw1);  // oldest gone
}

TEST_CASE("replay buffer keeps everything below capacity") {
    ReplayBuffer b(100);
    for (int i = 0; i < 50; ++i) b.push(make_exp(i));
    CHECK(b.size() == 50);
    for (int i = 0; i < 50; ++i) CHECK(b.at(i).x[0] == i);
}

TEST_CASE("replay buffer sampling is uniform with replacement") {
    ReplayBuffer b(10);
    for (int i = 0; i < 10; ++i) b.push(make_exp(i));
    RngStream rng(2024);

    // multinomial bound: n p (1-p) variance per bin, check every bin within
    // 3 sigma of the mean for a fixed seed
    const int draws = 100000;
    std::vector<int> counts(10, 0);
    for (int i = 0; i < draws; i += 10) {
        const auto batch = b.sample(10, rng);
        for (const auto* e : batch) counts[static_cast<int>(e->x[0])]++;
    }
    const double p = 0.1;
    const double mean = draws * p;
    const double sigma = std::sqrt(draws * p * (1.0 - p));
    for (int c : counts) CHECK(std::abs(c - mean) <= 3.0 * sigma);
}

TEST_CASE("replay buffer rejects underfilled sampling and bad values") {
    ReplayBuffer b(10);
    RngStream rng(1);
    b.push(make_exp(1.0));
    CHECK_THROWS(b.sample(2, rng));
    CHECK_THROWS(b.push(Experience{{std::nan(""), 0.0}, {0.0}, {0.0, 0.0}, 0.0}));
    CHECK_THROWS(ReplayBuffer(0));
}

TEST_CASE("ou process recurrence") {
    OuProcess ou;
    ou.reset(1);
    CHECK(ou.eps == std::vector<double>{0.0});

    // force eps' = 0 by using p3 = 0: from 0 stays 0, from 1 decays by 1 - p1
    OuProcess frozen;
    frozen.p3 = 0.0;
    frozen.reset(1);
    RngStream rng(3);
    frozen.next(rng);
    CHECK(frozen.eps[0] == 0.0);
    frozen.eps[0] = 1.0;
    frozen.next(rng);
    CHECK(frozen.eps[0] == doctest::Approx(0.85).epsilon(1e-15));
}

TEST_CASE("ou process long-run standard deviation") {
    // stationary std = p3 / sqrt(1 - (1 - p1)^2) ~= 0.5695
    OuProcess ou;
    ou.reset(1);
    RngStream rng(99);
    double sq = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        ou.next(rng);
        sq += ou.eps[0] * ou.eps[0];
    }
    const double want = 0.3 / std::sqrt(1.0 - 0.85 * 0.85);
    const double got = std::sqrt(sq / n);
    CHECK(std::abs(got - want) / want < 0.05);
}

TEST_CASE("train with zero episodes returns the initialized model") {
    Stage1Config cfg = tiny_config(7);
    cfg.episodes = 0;
    const auto result = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    CHECK(result.log.empty());
    const QModel fresh = make_qmodel(cfg.naf, derive_seed(cfg.seed, 1));
    CHECK(result.model.main.values == fresh.main.values);
    CHECK(result.model.target.values == result.model.main.values);
}

TEST_CASE("train is bit-reproducible for a fixed seed") {
    const Stage1Config cfg = tiny_config(11);
    const auto r1 = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    const auto r2 = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    CHECK(r1.model.main.values == r2.model.main.values);
    CHECK(r1.model.target.values == r2.model.target.values);
    REQUIRE(r1.log.size() == r2.log.size());
    std::ostringstream log1, log2;
    write_train_log_csv(log1, r1.log);
    write_train_log_csv(log2, r2.log);
    CHECK(log1.str() == log2.str());

    Stage1Config other = cfg;
    other.seed = 12;
    const auto r3 = train(benchmark(0.0, 5.0), benchmark_reward(), other);
    CHECK(r1.model.main.values != r3.model.main.values);
}

TEST_CASE("train updates start only after warmup and change parameters") {
    Stage1Config cfg = tiny_config(5);
    cfg.episodes = 1;
    cfg.steps_per_episode = 10;
    cfg.minibatch = 16;  // more than one episode provides
    cfg.warmup = 16;
    const auto result = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    const QModel fresh = make_qmodel(cfg.naf, derive_seed(cfg.seed, 1));
    CHECK(result.model.main.values == fresh.main.values);  // no gradient step happened
    CHECK(result.log.back().mean_loss == 0.0);

    cfg.steps_per_episode = 40;
    const auto trained = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    CHECK(trained.model.main.values != fresh.main.values);
    CHECK(trained.log.back().mean_loss > 0.0);
}

TEST_CASE("tau = 1 pins the target to main") {
    Stage1Config cfg = tiny_config(13);
    cfg.episodes = 2;
    cfg.tau = 1.0;
    const auto result = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    CHECK(result.model.target.values == result.model.main.values);

    // small tau: target lags main but stays finite
    cfg.tau = 0.005;
    const auto lagging = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    CHECK(lagging.model.target.values != lagging.model.main.values);
    for (double v : lagging.model.target.values) CHECK(std::isfinite(v));
}

TEST_CASE("model selection returns the best probed snapshot") {
    Stage1Config cfg = tiny_config(17);
    cfg.episodes = 6;
    cfg.eval_every = 1;
    cfg.probe_x0 = {std::numbers::pi, 0.0};
    cfg.eval_horizon = 50;
    const auto plant = benchmark(0.0, 5.0);
    const auto rs = benchmark_reward();
    const auto selected = train(plant, rs, cfg);

    // determinism holds with probing enabled
    const auto again = train(plant, rs, cfg);
    CHECK(selected.model.main.values == again.model.main.values);

    // the returned snapshot can only be at least as good on the probe as the
    // final-parameters model from the same run
    Stage1Config no_sel = cfg;
    no_sel.eval_every = 0;
    const auto last = train(plant, rs, no_sel);
    auto probe = [&](const QModel& m) {
        std::vector<double> x = cfg.probe_x0;
        double g = 0.0;
        for (int k = 0; k <= cfg.eval_horizon; ++k) {
            const auto mu = naf_eval(m, Which::kMain, x).mu;
            const auto a = clip_action(plant.action_box, mu);
            g += reward(rs, x, a);
            x = step(plant, x, a);
        }
        return g;
    };
    CHECK(probe(selected.model) >= probe(last.model));
}

TEST_CASE("train log CSV shape") {
    Stage1Config cfg = tiny_config(3);
    cfg.episodes = 2;
    const auto result = train(benchmark(0.0, 5.0), benchmark_reward(), cfg);
    std::ostringstream os;
    write_train_log_csv(os, result.log);
    const std::string text = os.str();
    CHECK(text.rfind("episode,return,mean_loss,final_state_norm\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);  // header + 2 rows
}
