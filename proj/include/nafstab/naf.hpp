#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nafstab/experience.hpp"
#include "nafstab/mat.hpp"
#include "nafstab/net.hpp"

namespace nafstab {

// Network-head geometry of a continuous Q-function with a normalized
// advantage term. The network maps the state to 1 + n_a + n_a(n_a+1)/2 raw
// outputs, laid out as
//   [ V | mu_raw (n_a) | l_diag_raw (n_a) | l_lower_raw, row-major ].
// mu = tanh(mu_raw); diag(L) = exp(l_diag_raw); strict lower of L is raw.
struct NafConfig {
    int n_x = 0;
    int n_a = 0;
    std::vector<int> hidden;

    int l_entries() const { return n_a * (n_a + 1) / 2; }
    int output_dim() const { return 1 + n_a + l_entries(); }

    // relu hidden layers, linear output layer (head transforms are applied
    // on top of the raw linear outputs)
    std::vector<LayerSpec> layer_specs() const;

    friend bool operator==(const NafConfig&, const NafConfig&) = default;
};

// One NAF forward result. P = L L' is symmetric positive definite by
// construction, so argmax_a Q(x, a) = mu.
struct NafEval {
    double v = 0.0;
    std::vector<double> mu;   // tanh applied, each in (-1, 1)
    Mat l;                    // lower-triangular, positive diagonal
    Mat p;                    // L L'
    std::vector<double> raw;  // raw network outputs
    Tape tape;
};

enum class Which { kMain, kTarget };

// Main and target parameter vectors over the same layout. reward_scale
// records the factor applied to rewards during training: the network then
// represents scale * Q. Scaling is policy-neutral (argmax_a is unchanged)
// but keeps the value head in a range Adam can reach quickly; consumers
// needing true Q values divide V and P by it.
struct QModel {
    NafConfig cfg;
    NetParams main;
    NetParams target;
    std::uint64_t seed = 0;
    double reward_scale = 1.0;
};

// head_init_scale shrinks the output layer's initial weights so the head
// starts near V = 0, mu = 0, P = I: with fan-in-sized head weights the tanh
// mu outputs start saturated and the exponential diagonal starts erratic,
// which stalls training.
QModel make_qmodel(const NafConfig& cfg, std::uint64_t seed, double head_init_scale = 0.01);

void naf_eval_into(const QModel& m, Which which, std::span<const double> x, NafEval& out);
NafEval naf_eval(const QModel& m, Which which, std::span<const double> x);

// Q = V + A with A = -1/2 (a - mu)' P (a - mu). A is returned through
// advantage when non-null.
double q_value(const NafEval& e, std::span<const double> a, double* advantage = nullptr);

// argmax_a Q(x, a); equals mu exactly.
std::vector<double> greedy_action(const NafEval& e);

// r + gamma * V(x_next) from the target network.
double td_target(const QModel& m, double r, std::span<const double> x_next, double gamma);

struct BatchLoss {
    double loss = 0.0;
    std::vector<double> grad;  // over main params
};

// Mean squared TD loss over the batch, targets treated as constants (no
// gradient through the target network); exact gradient for the main params.
BatchLoss batch_loss_and_grad(const QModel& m, std::span<const Experience* const> batch, double gamma);
BatchLoss batch_loss_and_grad(const QModel& m, std::span<const Experience> batch, double gamma);

// target <- tau * main + (1 - tau) * target, entrywise. 0 < tau <= 1.
void soft_update(QModel& m, double tau);

// Versioned model file: NAF metadata + seed + main/target net sections.
// Round-trips bit-exactly.
void save_model(const QModel& m, const std::string& path);
QModel load_model(const std::string& path);

}  // namespace nafstab
