#include "nafstab/ensemble.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "nafstab/csv.hpp"
#include "nafstab/errors.hpp"

namespace nafstab {

double naf_point_q(const NafPoint& pt, std::span<const double> a) {
    const int na = static_cast<int>(pt.mu.size());
    if (static_cast<int>(a.size()) != na) throw std::invalid_argument("naf_point_q: action length mismatch");
    static thread_local std::vector<double> u;
    u.resize(na);
    for (int i = 0; i < na; ++i) u[i] = a[i] - pt.mu[i];
    return pt.v - 0.5 * quad_form(pt.p, u);
}

NafPoint QModelBasis::eval(std::span<const double> x) const {
    static thread_local NafEval e;
    naf_eval_into(model_, Which::kMain, x, e);
    // the network represents reward_scale * Q; expose true Q components
    NafPoint pt{e.v, e.mu, e.p};
    const double s = model_.reward_scale;
    if (s != 1.0) {
        pt.v /= s;
        for (int i = 0; i < pt.p.rows(); ++i)
            for (int j = 0; j < pt.p.cols(); ++j) pt.p(i, j) /= s;
    }
    return pt;
}

QEnsemble make_ensemble(std::vector<std::shared_ptr<const NafBasis>> members, double eta, double eps_w,
                        double alpha, double gamma) {
    if (members.empty()) throw std::invalid_argument("make_ensemble: need at least one member");
    const int nx = members.front()->state_dim();
    const int na = members.front()->action_dim();
    for (const auto& m : members)
        if (m->state_dim() != nx || m->action_dim() != na)
            throw std::invalid_argument("make_ensemble: members disagree on dimensions");
    QEnsemble e;
    e.members = std::move(members);
    e.w.assign(e.members.size(), 1.0 / static_cast<double>(e.members.size()));
    e.eta = eta;
    e.eps_w = eps_w;
    e.alpha = alpha;
    e.gamma = gamma;
    return e;
}

std::vector<NafPoint> eval_members(const QEnsemble& e, std::span<const double> x) {
    std::vector<NafPoint> pts;
    pts.reserve(e.members.size());
    for (const auto& m : e.members) pts.push_back(m->eval(x));
    return pts;
}

double ensemble_q_at(const QEnsemble& e, std::span<const NafPoint> pts, std::span<const double> a) {
    double q = 0.0;
    for (std::size_t j = 0; j < pts.size(); ++j)
        if (e.w[j] != 0.0) q += e.w[j] * naf_point_q(pts[j], a);
    return q;
}

double ensemble_q(const QEnsemble& e, std::span<const double> x, std::span<const double> a) {
    const auto pts = eval_members(e, x);
    return ensemble_q_at(e, pts, a);
}

std::vector<double> greedy_action_at(const QEnsemble& e, std::span<const NafPoint> pts) {
    const int na = e.members.front()->action_dim();
    int active = -1, n_active = 0;
    for (std::size_t j = 0; j < pts.size(); ++j) {
        if (e.w[j] != 0.0) {
            active = static_cast<int>(j);
            ++n_active;
        }
    }
    if (n_active == 0) throw std::invalid_argument("greedy_action: all weights are zero");
    if (n_active == 1) return pts[active].mu;  // exact collapse

    Mat m(na, na);
    std::vector<double> rhs(na, 0.0);
    for (std::size_t j = 0; j < pts.size(); ++j) {
        const double wj = e.w[j];
        if (wj == 0.0) continue;
        const NafPoint& pt = pts[j];
        for (int r = 0; r < na; ++r) {
            double pmu = 0.0;
            for (int c = 0; c < na; ++c) {
                m(r, c) += wj * pt.p(r, c);
                pmu += pt.p(r, c) * pt.mu[c];
            }
            rhs[r] += wj * pmu;
        }
    }
    Mat l;
    if (!cholesky(m, l))
        throw std::logic_error("greedy_action: weighted P sum not positive definite (internal error)");
    return cholesky_solve(l, rhs);
}

std::vector<double> greedy_action(const QEnsemble& e, std::span<const double> x) {
    const auto pts = eval_members(e, x);
    return greedy_action_at(e, pts);
}

TdResult td_error(const QEnsemble& e, const Experience& exp) {
    const auto pts_next = eval_members(e, exp.x_next);
    const auto a_next = greedy_action_at(e, pts_next);
    const double q_max = ensemble_q_at(e, pts_next, a_next);
    TdResult td;
    td.target = exp.r + e.gamma * q_max;
    td.delta = td.target - ensemble_q(e, exp.x, exp.a);
    return td;
}

std::vector<double> grad_w(const QEnsemble& e, const Experience& exp, TdResult* td_out) {
    const TdResult td = td_error(e, exp);
    if (td_out) *td_out = td;
    const auto pts = eval_members(e, exp.x);
    std::vector<double> g(e.members.size());
    for (std::size_t j = 0; j < g.size(); ++j) g[j] = -td.delta * naf_point_q(pts[j], exp.a);
    return g;
}

std::vector<double> barrier_grad(std::span<const double> w, double eps_w) {
    std::vector<double> g(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        if (!(w[j] + eps_w > 0.0)) throw std::invalid_argument("barrier_grad: weight at or below -eps_w");
        g[j] = -1.0 / (w[j] + eps_w);
    }
    return g;
}

SimplexStep apply_simplex_update(std::vector<double>& w, std::span<const double> grad, double alpha,
                                 int max_halvings) {
    if (grad.size() != w.size()) throw std::invalid_argument("apply_simplex_update: length mismatch");
    static thread_local std::vector<double> cand;
    cand.resize(w.size());
    double scale = alpha;
    for (int l = 0; l <= max_halvings; ++l, scale *= 0.5) {
        bool positive = true;
        double sum = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) {
            cand[j] = w[j] - scale * grad[j];
            if (!(cand[j] > 0.0)) {
                positive = false;
                break;
            }
            sum += cand[j];
        }
        if (!positive) continue;
        for (std::size_t j = 0; j < w.size(); ++j) w[j] = cand[j] / sum;
        return SimplexStep{l, false};
    }
    return SimplexStep{max_halvings, true};  // skip; w unchanged
}

UpdateResult update_weights(QEnsemble& e, const Experience& exp) {
    TdResult td;
    std::vector<double> g = grad_w(e, exp, &td);
    const auto bg = barrier_grad(e.w, e.eps_w);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += e.eta * bg[j];
    const SimplexStep st = apply_simplex_update(e.w, g, e.alpha);
    return UpdateResult{td.delta, st.halvings, st.skipped};
}

std::vector<double> exploration_noise(const NoisePolicy& np, int k, std::span<const double> x, int n_a,
                                      RngStream& rng) {
    std::vector<double> eps(n_a, 0.0);
    double scale = 0.0;
    switch (np.kind) {
        case NoiseKind::kNone:
            return eps;
        case NoiseKind::kDecay:
            scale = np.scale * static_cast<double>(std::max(np.horizon - k, 0)) / np.horizon;
            break;
        case NoiseKind::kNormGated: {
            double n2 = 0.0;
            for (double v : x) n2 += v * v;
            scale = std::sqrt(n2) >= np.gate ? np.scale : 0.0;
            break;
        }
    }
    if (scale == 0.0) return eps;
    for (int i = 0; i < n_a; ++i) eps[i] = scale * rng.gauss();
    return eps;
}

double OnlineLog::total_reward() const {
    double s = 0.0;
    for (const auto& rec : records) s += rec.r;
    return s;
}

OnlineLog online_run(QEnsemble& e, const PlantSpec& plant, const RewardSpec& rs, const OnlineRunConfig& cfg) {
    const int na = e.members.front()->action_dim();
    if (static_cast<int>(cfg.x0.size()) != e.members.front()->state_dim())
        throw std::invalid_argument("online_run: x0 dimension mismatch");

    OnlineLog log;
    log.records.reserve(cfg.steps);
    RngStream rng(cfg.seed);
    PlantSpec spec = plant;
    std::vector<double> x = cfg.x0, x_next;
    for (int k = 0; k < cfg.steps; ++k) {
        if (cfg.schedule) spec.xi = schedule_xi(*cfg.schedule, k);

        const auto pts = eval_members(e, x);
        std::vector<double> a = greedy_action_at(e, pts);
        const auto eps = exploration_noise(cfg.noise, k, x, na, rng);
        for (int i = 0; i < na; ++i) a[i] += eps[i];
        a = clip_action(spec.action_box, a);

        step_into(spec, x, a, x_next);
        const double r = reward(rs, x, a);
        const Experience exp{x, a, x_next, r};
        const UpdateResult upd = update_weights(e, exp);
        if (upd.skipped) ++log.skipped_updates;

        log.records.push_back({k, x, a, r, std::abs(upd.delta), e.w});

        double n2 = 0.0;
        for (double v : x_next) n2 += v * v;
        if (!(std::sqrt(n2) <= cfg.divergence_norm))
            throw DivergenceError("online_run: state norm exceeded divergence guard at step " +
                                  std::to_string(k));
        x = x_next;
    }
    return log;
}

void write_online_log_csv(std::ostream& os, const OnlineLog& log, int n_x, int n_a, int n_members) {
    os << "k";
    for (int i = 1; i <= n_x; ++i) os << ",x" << i;
    if (n_a == 1) {
        os << ",a";
    } else {
        for (int i = 1; i <= n_a; ++i) os << ",a" << i;
    }
    os << ",r,abs_delta";
    for (int j = 1; j <= n_members; ++j) os << ",w_" << j;
    os << "\n";
    for (const auto& rec : log.records) {
        os << rec.k;
        for (double v : rec.x) os << ',' << fmt_double(v);
        for (double v : rec.a) os << ',' << fmt_double(v);
        os << ',' << fmt_double(rec.r) << ',' << fmt_double(rec.abs_delta);
        for (double v : rec.w) os << ',' << fmt_double(v);
        os << "\n";
    }
}

}  // namespace nafstab
