#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace nafstab {

enum class Activation { kRelu, kTanh, kLinear };

struct LayerSpec {
    int in_dim = 0;
    int out_dim = 0;
    Activation act = Activation::kLinear;

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

std::size_t param_count(const std::vector<LayerSpec>& layers);

// Flat parameter store for a dense feedforward network. Per layer: weight
// matrix W (out_dim x in_dim, row-major) followed by bias b (out_dim).
struct NetParams {
    std::vector<LayerSpec> layers;
    std::vector<double> values;

    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const;
    int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
};

// Weights uniform on [-1/sqrt(in_dim), +1/sqrt(in_dim)] per layer, biases
// zero. Deterministic for a fixed seed. Throws on a broken layer chain.
NetParams init_params(const std::vector<LayerSpec>& layers, std::uint64_t seed);

// Intermediate values of one forward pass; enough to compute exact gradients
// of any scalar loss of the outputs w.r.t. parameters and input.
struct Tape {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;   // pre-activation, per layer
    std::vector<std::vector<double>> post;  // post-activation, per layer
    std::size_t n_params = 0;               // size of the params that produced the tape
};

// y = composed affine+activation maps. If tape is non-null it is overwritten
// (buffers are reused across calls). Throws on length mismatch or non-finite
// input.
void forward_into(const NetParams& p, std::span<const double> x, std::vector<double>& y, Tape* tape = nullptr);
std::vector<double> forward(const NetParams& p, std::span<const double> x, Tape* tape = nullptr);

struct BackwardResult {
    std::vector<double> wrt_params;
    std::vector<double> wrt_input;
};

// Exact reverse-mode gradients of loss given dLoss/dy. Throws if the tape was
// not produced by params of this shape.
BackwardResult backward(const NetParams& p, const Tape& t, std::span<const double> dloss_dy);

// Hot-loop variant: adds gradients into grad_params (size = values.size());
// grad_input (size = input_dim) is overwritten when non-empty.
void backward_accumulate(const NetParams& p, const Tape& t, std::span<const double> dloss_dy,
                         std::span<double> grad_params, std::span<double> grad_input);

struct AdamConfig {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;

    AdamState(std::size_t n, AdamConfig c) : cfg(c), m(n, 0.0), v(n, 0.0) {}
};

// Standard Adam update with bias correction; increments t. Throws on
// non-finite gradient entries.
void adam_step(NetParams& p, std::span<const double> grad, AdamState& s);

// Raw-net persistence section: layer specs, seed, flat values. Exact 64-bit
// round trip. Used standalone and as the payload of the NAF model file.
void write_net(std::ostream& os, const NetParams& p);
NetParams read_net(std::istream& is);

}  // namespace nafstab
