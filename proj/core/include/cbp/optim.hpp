#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "cbp/network.hpp"

namespace cbp {

struct SgdConfig {
    double step_size = 0.01;
    double weight_decay = 0.0;  // 0 means plain SGD
};

struct AdamConfig {
    double step_size = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // added to the gradient before the moment updates
};

// Per-weight Adam state. Every weight and bias carries its own timestep so a
// reset entry bias-corrects like a brand new weight. beta^t is kept as a
// running product, which restarts from 1 on reset and therefore reproduces a
// fresh weight bit for bit.
struct AdamLayerState {
    Matrix m_w, v_w;
    Matrix pow1_w, pow2_w;  // beta1^t, beta2^t per weight
    std::vector<std::int64_t> t_w;

    std::vector<double> m_b, v_b, pow1_b, pow2_b;
    std::vector<std::int64_t> t_b;
};

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::vector<AdamLayerState> layers;
};

AdamState make_adam_state(const Network& net, const AdamConfig& cfg);

/// Identifies one trainable scalar: weight (in, out) of `layer`, or the bias
/// of unit `out` when `bias` is set.
struct WeightId {
    std::size_t layer = 0;
    std::size_t in = 0;
    std::size_t out = 0;
    bool bias = false;
};

/// w <- w - alpha * (g + lambda * w) for weights; biases take the plain
/// gradient without decay.
void sgd_step(Network& net, const Gradients& grads, const SgdConfig& cfg);

/// Per-weight Adam with bias corrections from that weight's own timestep.
void adam_step(Network& net, const Gradients& grads, AdamState& state, double step_size,
               double weight_decay = 0.0);

/// Zeroes m, v and the timestep of exactly the listed entries.
void reset_weight_state(AdamState& state, std::span<const WeightId> ids);

class SgdOptimizer {
public:
    explicit SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {}
    void step(Network& net, const Gradients& grads) { sgd_step(net, grads, cfg_); }
    const SgdConfig& config() const { return cfg_; }

private:
    SgdConfig cfg_;
};

class AdamOptimizer {
public:
    AdamOptimizer(const Network& net, AdamConfig cfg)
        : cfg_(cfg), state_(make_adam_state(net, cfg)) {}
    void step(Network& net, const Gradients& grads) {
        adam_step(net, grads, state_, cfg_.step_size, cfg_.weight_decay);
    }
    AdamState& state() { return state_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    AdamState state_;
};

using Optimizer = std::variant<SgdOptimizer, AdamOptimizer>;

void optimizer_step(Optimizer& opt, Network& net, const Gradients& grads);

/// Adam state of the optimizer, or nullptr for SGD.
AdamState* adam_state(Optimizer& opt);

}  // namespace cbp
