#include "cbp/optim.hpp"

#include <cmath>
#include <string>

#include "cbp/errors.hpp"

namespace cbp {

void sgd_step(Network& net, const Gradients& grads, const SgdConfig& cfg) {
    if (grads.weights.size() != net.layers.size())
        throw ConfigError("sgd_step: gradient shape mismatch");
    const double alpha = cfg.step_size;
    const double lambda = cfg.weight_decay;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        double* w = layer.weights.data();
        const double* g = grads.weights[l].data();
        const std::size_t n = layer.weights.size();
        for (std::size_t k = 0; k < n; ++k) w[k] -= alpha * (g[k] + lambda * w[k]);
        for (std::size_t j = 0; j < layer.biases.size(); ++j)
            layer.biases[j] -= alpha * grads.biases[l][j];
        for (std::size_t k = 0; k < n; ++k)
            if (!std::isfinite(w[k]))
                throw NumericError("sgd_step: non-finite weight in layer " + std::to_string(l));
        for (double b : layer.biases)
            if (!std::isfinite(b))
                throw NumericError("sgd_step: non-finite bias in layer " + std::to_string(l));
    }
}

AdamState make_adam_state(const Network& net, const AdamConfig& cfg) {
    AdamState st;
    st.beta1 = cfg.beta1;
    st.beta2 = cfg.beta2;
    st.eps = cfg.eps;
    st.layers.resize(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const std::size_t rows = net.layers[l].weights.rows();
        const std::size_t cols = net.layers[l].weights.cols();
        const std::size_t nb = net.layers[l].biases.size();
        AdamLayerState& s = st.layers[l];
        s.m_w = Matrix(rows, cols);
        s.v_w = Matrix(rows, cols);
        s.pow1_w = Matrix(rows, cols, 1.0);
        s.pow2_w = Matrix(rows, cols, 1.0);
        s.t_w.assign(rows * cols, 0);
        s.m_b.assign(nb, 0.0);
        s.v_b.assign(nb, 0.0);
        s.pow1_b.assign(nb, 1.0);
        s.pow2_b.assign(nb, 1.0);
        s.t_b.assign(nb, 0);
    }
    return st;
}

namespace {

inline double adam_update(double g, double& m, double& v, double& pow1, double& pow2,
                          std::int64_t& t, double beta1, double beta2, double eps,
                          double step_size) {
    t += 1;
    pow1 *= beta1;
    pow2 *= beta2;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double m_hat = m / (1.0 - pow1);
    const double v_hat = v / (1.0 - pow2);
    return step_size * m_hat / (std::sqrt(v_hat) + eps);
}

}  // namespace

void adam_step(Network& net, const Gradients& grads, AdamState& state, double step_size,
               double weight_decay) {
    if (state.layers.size() != net.layers.size() || grads.weights.size() != net.layers.size())
        throw ConfigError("adam_step: shape mismatch");
    const double b1 = state.beta1, b2 = state.beta2, eps = state.eps;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Layer& layer = net.layers[l];
        AdamLayerState& s = state.layers[l];
        double* w = layer.weights.data();
        const double* g = grads.weights[l].data();
        const std::size_t n = layer.weights.size();
        for (std::size_t k = 0; k < n; ++k) {
            const double gk = g[k] + weight_decay * w[k];
            w[k] -= adam_update(gk, s.m_w.data()[k], s.v_w.data()[k], s.pow1_w.data()[k],
                                s.pow2_w.data()[k], s.t_w[k], b1, b2, eps, step_size);
        }
        for (std::size_t j = 0; j < layer.biases.size(); ++j) {
            layer.biases[j] -= adam_update(grads.biases[l][j], s.m_b[j], s.v_b[j], s.pow1_b[j],
                                           s.pow2_b[j], s.t_b[j], b1, b2, eps, step_size);
        }
    }
}

void reset_weight_state(AdamState& state, std::span<const WeightId> ids) {
    for (const WeightId& id : ids) {
        if (id.layer >= state.layers.size()) throw ConfigError("reset_weight_state: bad layer");
        AdamLayerState& s = state.layers[id.layer];
        if (id.bias) {
            if (id.out >= s.m_b.size()) throw ConfigError("reset_weight_state: bad bias index");
            s.m_b[id.out] = 0.0;
            s.v_b[id.out] = 0.0;
            s.pow1_b[id.out] = 1.0;
            s.pow2_b[id.out] = 1.0;
            s.t_b[id.out] = 0;
        } else {
            if (id.in >= s.m_w.rows() || id.out >= s.m_w.cols())
                throw ConfigError("reset_weight_state: bad weight index");
            const std::size_t k = id.in * s.m_w.cols() + id.out;
            s.m_w.data()[k] = 0.0;
            s.v_w.data()[k] = 0.0;
            s.pow1_w.data()[k] = 1.0;
            s.pow2_w.data()[k] = 1.0;
            s.t_w[k] = 0;
        }
    }
}

void optimizer_step(Optimizer& opt, Network& net, const Gradients& grads) {
    std::visit([&](auto& o) { o.step(net, grads); }, opt);
}

AdamState* adam_state(Optimizer& opt) {
    if (auto* adam = std::get_if<AdamOptimizer>(&opt)) return &adam->state();
    return nullptr;
}

}  // namespace cbp
