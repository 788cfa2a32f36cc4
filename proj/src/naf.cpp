#include "nafstab/naf.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "nafstab/errors.hpp"

namespace nafstab {

namespace {

constexpr char kMagic[8] = {'N', 'A', 'F', 'Q', 'M', 'D', 'L', '\0'};
constexpr std::uint32_t kVersion = 2;

const NetParams& pick(const QModel& m, Which which) {
    return which == Which::kMain ? m.main : m.target;
}

// dLoss/d(raw outputs) for a scalar loss with known dLoss/dQ at action a.
// The only nonstandard chain factors are tanh on mu and exp on diag(L).
void q_backward_raw(const NafConfig& cfg, const NafEval& e, std::span<const double> a, double dq,
                    std::vector<double>& dldy) {
    const int na = cfg.n_a;
    dldy.assign(cfg.output_dim(), 0.0);
    dldy[0] = dq;  // V

    // u = a - mu, s = L' u
    static thread_local std::vector<double> u, s;
    u.resize(na);
    s.resize(na);
    for (int i = 0; i < na; ++i) u[i] = a[i] - e.mu[i];
    for (int j = 0; j < na; ++j) {
        double acc = 0.0;
        for (int i = j; i < na; ++i) acc += e.l(i, j) * u[i];
        s[j] = acc;
    }

    // dQ/dmu_i = (P u)_i, chain through tanh
    for (int i = 0; i < na; ++i) {
        double pu = 0.0;
        for (int j = 0; j < na; ++j) pu += e.p(i, j) * u[j];
        dldy[1 + i] = dq * pu * (1.0 - e.mu[i] * e.mu[i]);
    }

    // dQ/dL_ij = -u_i s_j; diagonal chains through exp (factor = L_ii itself)
    for (int i = 0; i < na; ++i)
        dldy[1 + na + i] = dq * (-u[i] * s[i]) * e.l(i, i);
    int off = 1 + 2 * na;
    for (int i = 1; i < na; ++i)
        for (int j = 0; j < i; ++j)
            dldy[off++] = dq * (-u[i] * s[j]);
}

}  // namespace

std::vector<LayerSpec> NafConfig::layer_specs() const {
    if (n_x < 1 || n_a < 1) throw std::invalid_argument("naf: n_x and n_a must be >= 1");
    std::vector<LayerSpec> specs;
    int in = n_x;
    for (int h : hidden) {
        specs.push_back({in, h, Activation::kRelu});
        in = h;
    }
    specs.push_back({in, output_dim(), Activation::kLinear});
    return specs;
}

QModel make_qmodel(const NafConfig& cfg, std::uint64_t seed, double head_init_scale) {
    QModel m;
    m.cfg = cfg;
    m.seed = seed;
    m.main = init_params(cfg.layer_specs(), seed);
    const std::size_t last = m.main.layers.size() - 1;
    for (std::size_t i = m.main.weight_offset(last); i < m.main.values.size(); ++i)
        m.main.values[i] *= head_init_scale;
    m.target = m.main;
    return m;
}

void naf_eval_into(const QModel& m, Which which, std::span<const double> x, NafEval& out) {
    const int na = m.cfg.n_a;
    forward_into(pick(m, which), x, out.raw, &out.tape);
    for (double v : out.raw)
        if (!std::isfinite(v)) throw DivergenceError("naf_eval: non-finite network output");

    out.v = out.raw[0];
    out.mu.resize(na);
    for (int i = 0; i < na; ++i) out.mu[i] = std::tanh(out.raw[1 + i]);

    if (out.l.rows() != na || out.l.cols() != na) out.l.resize(na, na);
    if (out.p.rows() != na || out.p.cols() != na) out.p.resize(na, na);
    int off = 1 + 2 * na;
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < i; ++j) out.l(i, j) = out.raw[off++];
        out.l(i, i) = std::exp(out.raw[1 + na + i]);
        for (int j = i + 1; j < na; ++j) out.l(i, j) = 0.0;
    }
    // P = L L', filled symmetrically from one accumulation per (i, j) pair
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = 0.0;
            for (int k = 0; k <= j; ++k) s += out.l(i, k) * out.l(j, k);
            out.p(i, j) = s;
            out.p(j, i) = s;
        }
    }
}

NafEval naf_eval(const QModel& m, Which which, std::span<const double> x) {
    NafEval e;
    naf_eval_into(m, which, x, e);
    return e;
}

double q_value(const NafEval& e, std::span<const double> a, double* advantage) {
    const int na = static_cast<int>(e.mu.size());
    if (static_cast<int>(a.size()) != na) throw std::invalid_argument("q_value: action length mismatch");
    static thread_local std::vector<double> u;
    u.resize(na);
    for (int i = 0; i < na; ++i) u[i] = a[i] - e.mu[i];
    const double adv = -0.5 * quad_form(e.p, u);
    if (advantage) *advantage = adv;
    return e.v + adv;
}

std::vector<double> greedy_action(const NafEval& e) { return e.mu; }

double td_target(const QModel& m, double r, std::span<const double> x_next, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("td_target: gamma out of [0,1)");
    static thread_local std::vector<double> y;
    forward_into(m.target, x_next, y, nullptr);
    return r + gamma * y[0];
}

BatchLoss batch_loss_and_grad(const QModel& m, std::span<const Experience* const> batch, double gamma) {
    if (batch.empty()) throw std::invalid_argument("batch_loss_and_grad: empty batch");
    BatchLoss out;
    out.grad.assign(m.main.values.size(), 0.0);

    static thread_local NafEval e;
    static thread_local std::vector<double> dldy;
    const double inv_i = 1.0 / static_cast<double>(batch.size());
    for (const Experience* exp : batch) {
        naf_eval_into(m, Which::kMain, exp->x, e);
        const double q = q_value(e, exp->a);
        const double t = td_target(m, exp->r, exp->x_next, gamma);
        const double err = t - q;
        out.loss += err * err * inv_i;
        const double dq = -2.0 * err * inv_i;  // dLoss/dQ
        q_backward_raw(m.cfg, e, exp->a, dq, dldy);
        backward_accumulate(m.main, e.tape, dldy, out.grad, {});
    }
    return out;
}

BatchLoss batch_loss_and_grad(const QModel& m, std::span<const Experience> batch, double gamma) {
    std::vector<const Experience*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& e : batch) ptrs.push_back(&e);
    return batch_loss_and_grad(m, ptrs, gamma);
}

void soft_update(QModel& m, double tau) {
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau out of (0,1]");
    for (std::size_t i = 0; i < m.target.values.size(); ++i)
        m.target.values[i] = tau * m.main.values[i] + (1.0 - tau) * m.target.values[i];
}

void save_model(const QModel& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_model: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    const std::uint32_t version = kVersion;
    os.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::int32_t nx = m.cfg.n_x, na = m.cfg.n_a;
    os.write(reinterpret_cast<const char*>(&nx), sizeof(nx));
    os.write(reinterpret_cast<const char*>(&na), sizeof(na));
    const std::uint32_t nh = static_cast<std::uint32_t>(m.cfg.hidden.size());
    os.write(reinterpret_cast<const char*>(&nh), sizeof(nh));
    for (int h : m.cfg.hidden) {
        const std::int32_t hv = h;
        os.write(reinterpret_cast<const char*>(&hv), sizeof(hv));
    }
    os.write(reinterpret_cast<const char*>(&m.seed), sizeof(m.seed));
    os.write(reinterpret_cast<const char*>(&m.reward_scale), sizeof(m.reward_scale));
    write_net(os, m.main);
    write_net(os, m.target);
    if (!os) throw std::runtime_error("save_model: write failed for " + path);
}

QModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_model: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load_model: not a model file: " + path);
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion) throw std::runtime_error("load_model: unsupported version");
    QModel m;
    std::int32_t nx = 0, na = 0;
    is.read(reinterpret_cast<char*>(&nx), sizeof(nx));
    is.read(reinterpret_cast<char*>(&na), sizeof(na));
    m.cfg.n_x = nx;
    m.cfg.n_a = na;
    std::uint32_t nh = 0;
    is.read(reinterpret_cast<char*>(&nh), sizeof(nh));
    m.cfg.hidden.resize(nh);
    for (auto& h : m.cfg.hidden) {
        std::int32_t hv = 0;
        is.read(reinterpret_cast<char*>(&hv), sizeof(hv));
        h = hv;
    }
    is.read(reinterpret_cast<char*>(&m.seed), sizeof(m.seed));
    is.read(reinterpret_cast<char*>(&m.reward_scale), sizeof(m.reward_scale));
    if (!is) throw std::runtime_error("load_model: truncated file");
    if (!(m.reward_scale > 0.0)) throw std::runtime_error("load_model: bad reward scale");
    m.main = read_net(is);
    m.target = read_net(is);
    if (m.main.layers != m.cfg.layer_specs())
        throw std::runtime_error("load_model: layer specs do not match NAF config");
    return m;
}

}  // namespace nafstab
