#include "nafstab/net.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "nafstab/rng.hpp"

namespace nafstab {

namespace {

void check_chain(const std::vector<LayerSpec>& layers) {
    if (layers.empty()) throw std::invalid_argument("net: empty layer list");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].in_dim < 1 || layers[i].out_dim < 1)
            throw std::invalid_argument("net: layer dims must be >= 1");
        if (i > 0 && layers[i].in_dim != layers[i - 1].out_dim)
            throw std::invalid_argument("net: consecutive layers do not chain");
    }
}

double apply_act(Activation a, double z) {
    switch (a) {
        case Activation::kRelu: return z > 0.0 ? z : 0.0;
        case Activation::kTanh: return std::tanh(z);
        case Activation::kLinear: return z;
    }
    return z;
}

// derivative of the activation given pre-activation z and post-activation y
double act_deriv(Activation a, double z, double y) {
    switch (a) {
        case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::kTanh: return 1.0 - y * y;
        case Activation::kLinear: return 1.0;
    }
    return 1.0;
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("net: truncated model stream");
    return v;
}

}  // namespace

std::size_t param_count(const std::vector<LayerSpec>& layers) {
    std::size_t n = 0;
    for (const auto& l : layers)
        n += static_cast<std::size_t>(l.in_dim) * l.out_dim + l.out_dim;
    return n;
}

std::size_t NetParams::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < layer; ++i)
        off += static_cast<std::size_t>(layers[i].in_dim) * layers[i].out_dim + layers[i].out_dim;
    return off;
}

std::size_t NetParams::bias_offset(std::size_t layer) const {
    return weight_offset(layer) + static_cast<std::size_t>(layers[layer].in_dim) * layers[layer].out_dim;
}

NetParams init_params(const std::vector<LayerSpec>& layers, std::uint64_t seed) {
    check_chain(layers);
    NetParams p;
    p.layers = layers;
    p.values.assign(param_count(layers), 0.0);
    RngStream rng(seed);
    std::size_t off = 0;
    for (const auto& l : layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
        const std::size_t nw = static_cast<std::size_t>(l.in_dim) * l.out_dim;
        for (std::size_t i = 0; i < nw; ++i) p.values[off + i] = rng.uniform(-bound, bound);
        off += nw + l.out_dim;  // biases stay zero
    }
    return p;
}

void forward_into(const NetParams& p, std::span<const double> x, std::vector<double>& y, Tape* tape) {
    if (static_cast<int>(x.size()) != p.input_dim())
        throw std::invalid_argument("forward: input length mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");

    const std::size_t nl = p.layers.size();
    if (tape) {
        tape->input.assign(x.begin(), x.end());
        tape->pre.resize(nl);
        tape->post.resize(nl);
        tape->n_params = p.values.size();
    }

    // cur/next double as scratch; y holds the final output
    static thread_local std::vector<double> cur;
    cur.assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t li = 0; li < nl; ++li) {
        const auto& l = p.layers[li];
        const double* w = p.values.data() + off;
        const double* b = w + static_cast<std::size_t>(l.in_dim) * l.out_dim;
        y.resize(l.out_dim);
        for (int o = 0; o < l.out_dim; ++o) {
            const double* row = w + static_cast<std::size_t>(o) * l.in_dim;
            double s = b[o];
            for (int i = 0; i < l.in_dim; ++i) s += row[i] * cur[i];
            y[o] = s;
        }
        if (tape) tape->pre[li].assign(y.begin(), y.end());
        for (int o = 0; o < l.out_dim; ++o) y[o] = apply_act(l.act, y[o]);
        if (tape) tape->post[li].assign(y.begin(), y.end());
        off += static_cast<std::size_t>(l.in_dim) * l.out_dim + l.out_dim;
        if (li + 1 < nl) cur.assign(y.begin(), y.end());
    }
}

std::vector<double> forward(const NetParams& p, std::span<const double> x, Tape* tape) {
    std::vector<double> y;
    forward_into(p, x, y, tape);
    return y;
}

void backward_accumulate(const NetParams& p, const Tape& t, std::span<const double> dloss_dy,
                         std::span<double> grad_params, std::span<double> grad_input) {
    const std::size_t nl = p.layers.size();
    if (t.n_params != p.values.size() || t.pre.size() != nl)
        throw std::invalid_argument("backward: tape does not match params");
    if (static_cast<int>(dloss_dy.size()) != p.output_dim())
        throw std::invalid_argument("backward: dloss_dy length mismatch");
    if (grad_params.size() != p.values.size())
        throw std::invalid_argument("backward: grad_params length mismatch");

    static thread_local std::vector<double> delta, delta_prev;
    delta.assign(dloss_dy.begin(), dloss_dy.end());

    std::size_t off = p.values.size();
    for (std::size_t li = nl; li-- > 0;) {
        const auto& l = p.layers[li];
        const std::size_t nw = static_cast<std::size_t>(l.in_dim) * l.out_dim;
        off -= nw + l.out_dim;
        const double* w = p.values.data() + off;
        double* gw = grad_params.data() + off;
        double* gb = gw + nw;
        const std::vector<double>& in = (li == 0) ? t.input : t.post[li - 1];

        // through the activation
        for (int o = 0; o < l.out_dim; ++o)
            delta[o] *= act_deriv(l.act, t.pre[li][o], t.post[li][o]);

        delta_prev.assign(l.in_dim, 0.0);
        for (int o = 0; o < l.out_dim; ++o) {
            const double d = delta[o];
            gb[o] += d;
            const double* row = w + static_cast<std::size_t>(o) * l.in_dim;
            double* grow = gw + static_cast<std::size_t>(o) * l.in_dim;
            for (int i = 0; i < l.in_dim; ++i) {
                grow[i] += d * in[i];
                delta_prev[i] += d * row[i];
            }
        }
        delta.swap(delta_prev);
    }
    if (!grad_input.empty()) {
        if (static_cast<int>(grad_input.size()) != p.input_dim())
            throw std::invalid_argument("backward: grad_input length mismatch");
        std::copy(delta.begin(), delta.end(), grad_input.begin());
    }
}

BackwardResult backward(const NetParams& p, const Tape& t, std::span<const double> dloss_dy) {
    BackwardResult r;
    r.wrt_params.assign(p.values.size(), 0.0);
    r.wrt_input.assign(p.input_dim(), 0.0);
    backward_accumulate(p, t, dloss_dy, r.wrt_params, r.wrt_input);
    return r;
}

void adam_step(NetParams& p, std::span<const double> grad, AdamState& s) {
    if (grad.size() != p.values.size() || s.m.size() != p.values.size())
        throw std::invalid_argument("adam: length mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) throw std::invalid_argument("adam: non-finite gradient");

    s.t += 1;
    const double b1 = s.cfg.beta1, b2 = s.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        s.m[i] = b1 * s.m[i] + (1.0 - b1) * grad[i];
        s.v[i] = b2 * s.v[i] + (1.0 - b2) * grad[i] * grad[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        p.values[i] -= s.cfg.step_size * mhat / (std::sqrt(vhat) + s.cfg.eps);
    }
}

void write_net(std::ostream& os, const NetParams& p) {
    write_pod(os, static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& l : p.layers) {
        write_pod(os, static_cast<std::int32_t>(l.in_dim));
        write_pod(os, static_cast<std::int32_t>(l.out_dim));
        write_pod(os, static_cast<std::uint8_t>(l.act));
    }
    write_pod(os, static_cast<std::uint64_t>(p.values.size()));
    os.write(reinterpret_cast<const char*>(p.values.data()),
             static_cast<std::streamsize>(p.values.size() * sizeof(double)));
}

NetParams read_net(std::istream& is) {
    NetParams p;
    const auto nl = read_pod<std::uint32_t>(is);
    p.layers.resize(nl);
    for (auto& l : p.layers) {
        l.in_dim = read_pod<std::int32_t>(is);
        l.out_dim = read_pod<std::int32_t>(is);
        l.act = static_cast<Activation>(read_pod<std::uint8_t>(is));
    }
    const auto nv = read_pod<std::uint64_t>(is);
    if (nv != param_count(p.layers)) throw std::runtime_error("net: value count does not match layer specs");
    p.values.resize(nv);
    is.read(reinterpret_cast<char*>(p.values.data()), static_cast<std::streamsize>(nv * sizeof(double)));
    if (!is) throw std::runtime_error("net: truncated model stream");
    return p;
}

}  // namespace nafstab
