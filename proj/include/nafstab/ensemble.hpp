#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "nafstab/experience.hpp"
#include "nafstab/mat.hpp"
#include "nafstab/naf.hpp"
#include "nafstab/plant.hpp"
#include "nafstab/rng.hpp"

namespace nafstab {

// NAF components (V, mu, P) of one basis Q-function at a state.
struct NafPoint {
    double v = 0.0;
    std::vector<double> mu;
    Mat p;
};

// Q = V - 1/2 (a - mu)' P (a - mu)
double naf_point_q(const NafPoint& pt, std::span<const double> a);

// A basis Q-function for the linear ensemble: anything that evaluates to NAF
// components at a state. Implementations must be immutable and safe to
// evaluate from several threads.
class NafBasis {
public:
    virtual ~NafBasis() = default;
    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual NafPoint eval(std::span<const double> x) const = 0;
};

// Pre-trained deep Q-function (main network) as a basis function.
class QModelBasis final : public NafBasis {
public:
    explicit QModelBasis(QModel model) : model_(std::move(model)) {}

    int state_dim() const override { return model_.cfg.n_x; }
    int action_dim() const override { return model_.cfg.n_a; }
    NafPoint eval(std::span<const double> x) const override;

    const QModel& model() const { return model_; }

private:
    QModel model_;
};

// Linear ensemble Q(x, a | w) = sum_j w_j Q_j(x, a) over frozen members,
// with w kept on the probability simplex.
struct QEnsemble {
    std::vector<std::shared_ptr<const NafBasis>> members;
    std::vector<double> w;
    double eta = 1e-7;    // barrier coefficient
    double eps_w = 1e-9;  // barrier floor
    double alpha = 5e-5;  // base learning rate
    double gamma = 0.99;
};

// Uniform initial weights w_j = 1/N.
QEnsemble make_ensemble(std::vector<std::shared_ptr<const NafBasis>> members, double eta = 1e-7,
                        double eps_w = 1e-9, double alpha = 5e-5, double gamma = 0.99);

std::vector<NafPoint> eval_members(const QEnsemble& e, std::span<const double> x);

double ensemble_q_at(const QEnsemble& e, std::span<const NafPoint> pts, std::span<const double> a);
double ensemble_q(const QEnsemble& e, std::span<const double> x, std::span<const double> a);

// Closed-form maximizer of the ensemble Q over actions: solves
//   (sum_j w_j P_j(x)) a = sum_j w_j P_j(x) mu_j(x)
// with a symmetric positive definite factorization. Zero-weight members drop
// out exactly; a single active member collapses to its mu.
std::vector<double> greedy_action_at(const QEnsemble& e, std::span<const NafPoint> pts);
std::vector<double> greedy_action(const QEnsemble& e, std::span<const double> x);

struct TdResult {
    double delta = 0.0;
    double target = 0.0;
};

// delta = t - Q(x, a | w) with t = r + gamma max_a' Q(x', a' | w); the target
// is a constant (semi-gradient convention).
TdResult td_error(const QEnsemble& e, const Experience& exp);

// dL/dw for L = 1/2 (t - Q(x, a | w))^2 with t frozen: dL/dw_j = -delta Q_j(x, a).
std::vector<double> grad_w(const QEnsemble& e, const Experience& exp, TdResult* td = nullptr);

// Gradient of the log barrier B(w) = -sum_j log(w_j + eps_w).
std::vector<double> barrier_grad(std::span<const double> w, double eps_w);

struct SimplexStep {
    int halvings = 0;
    bool skipped = false;
};

// w <- normalize(w - alpha 2^-l grad) for the smallest l >= 0 that keeps
// every entry strictly positive; if no l <= max_halvings works the update is
// skipped and w is left unchanged.
SimplexStep apply_simplex_update(std::vector<double>& w, std::span<const double> grad, double alpha,
                                 int max_halvings = 60);

struct UpdateResult {
    double delta = 0.0;
    int halvings = 0;
    bool skipped = false;
};

// One online Q-learning update of the ensemble weights from one experience:
// TD gradient plus eta * barrier gradient through the halving projection.
UpdateResult update_weights(QEnsemble& e, const Experience& exp);

enum class NoiseKind { kNone, kDecay, kNormGated };

// Stage-2 exploration noise. kDecay: scale * max(horizon - k, 0)/horizon *
// N(0,1) per component. kNormGated: scale * N(0,1) while ||x||_2 >= gate,
// zero otherwise.
struct NoisePolicy {
    NoiseKind kind = NoiseKind::kDecay;
    double scale = 0.1;
    int horizon = 400;
    double gate = 0.05;
};

std::vector<double> exploration_noise(const NoisePolicy& np, int k, std::span<const double> x, int n_a,
                                      RngStream& rng);

struct OnlineRecord {
    int k = 0;
    std::vector<double> x;
    std::vector<double> a;
    double r = 0.0;
    double abs_delta = 0.0;
    std::vector<double> w;  // weights after the step's update
};

struct OnlineLog {
    std::vector<OnlineRecord> records;
    int skipped_updates = 0;

    double total_reward() const;
};

struct OnlineRunConfig {
    int steps = 1001;
    NoisePolicy noise;
    std::vector<double> x0;
    std::optional<XiSchedule> schedule;  // overrides plant xi per step when set
    std::uint64_t seed = 0;
    double divergence_norm = 1e6;
};

// Online adaptation against the real plant: per step, act greedily plus
// exploration noise, clip, execute, then update and renormalize w. Members
// are never modified. Throws DivergenceError if the state norm exceeds
// divergence_norm.
OnlineLog online_run(QEnsemble& e, const PlantSpec& plant, const RewardSpec& rs, const OnlineRunConfig& cfg);

void write_online_log_csv(std::ostream& os, const OnlineLog& log, int n_x, int n_a, int n_members);

}  // namespace nafstab
