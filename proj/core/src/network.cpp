#include "cbp/network.hpp"

#include <cmath>
#include <random>

#include "cbp/errors.hpp"

namespace cbp {

const char* act_name(Act kind) {
    switch (kind) {
        case Act::Tanh: return "tanh";
        case Act::Sigmoid: return "sigmoid";
        case Act::Relu: return "relu";
        case Act::LeakyRelu: return "leaky_relu";
        case Act::Elu: return "elu";
        case Act::Swish: return "swish";
        case Act::Ltu: return "ltu";
        case Act::Linear: return "linear";
    }
    return "?";
}

double gain_for(const Activation& act) {
    switch (act.kind) {
        case Act::Tanh: return 5.0 / 3.0;
        case Act::Sigmoid: return 1.0;
        case Act::Relu: return std::sqrt(2.0);
        case Act::LeakyRelu: return std::sqrt(2.0 / (1.0 + act.slope * act.slope));
        case Act::Elu: return std::sqrt(2.0);
        case Act::Swish: return std::sqrt(2.0);
        case Act::Ltu: return 1.0;
        case Act::Linear: return 1.0;
    }
    return 1.0;
}

Network init_network(std::span<const std::size_t> widths, std::span<const Activation> acts,
                     std::uint64_t seed) {
    if (widths.size() < 2)
        throw ConfigError("init_network: need at least an input and an output width");
    if (acts.size() != widths.size() - 1)
        throw ConfigError("init_network: one activation per weight layer expected");
    for (std::size_t w : widths)
        if (w == 0) throw ConfigError("init_network: zero layer width");
    for (const auto& a : acts)
        if (a.kind == Act::Ltu)
            throw ConfigError("init_network: LTU is reserved for target networks");
    if (acts.back().kind != Act::Linear)
        throw ConfigError("init_network: output layer must be linear");

    Rng rng = make_rng(seed, RngStream::Init);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Network net;
    net.layers.resize(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer& layer = net.layers[l];
        const std::size_t fan_in = widths[l];
        const std::size_t fan_out = widths[l + 1];
        const double bound = gain_for(acts[l]) * std::sqrt(3.0 / static_cast<double>(fan_in));
        layer.weights = Matrix(fan_in, fan_out);
        layer.biases.assign(fan_out, 0.0);
        layer.activation = acts[l];
        layer.init_bound = bound;
        for (std::size_t i = 0; i < fan_in; ++i)
            for (std::size_t j = 0; j < fan_out; ++j) {
                double w;
                do {
                    w = bound * (2.0 * unit(rng) - 1.0);
                } while (std::abs(w) >= bound);  // keep weights strictly inside (-b, b)
                layer.weights(i, j) = w;
            }
    }
    return net;
}

void forward(const Network& net, std::span<const double> x, ForwardTrace& trace) {
    if (x.size() != net.input_width())
        throw ConfigError("forward: input width mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw NumericError("forward: non-finite input");

    const std::size_t n_layers = net.layers.size();
    trace.input.assign(x.begin(), x.end());
    trace.pre.resize(n_layers);
    trace.post.resize(n_layers);

    const std::vector<double>* in = &trace.input;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Layer& layer = net.layers[l];
        const std::size_t fan_in = layer.weights.rows();
        const std::size_t fan_out = layer.weights.cols();
        auto& pre = trace.pre[l];
        auto& post = trace.post[l];
        pre.assign(layer.biases.begin(), layer.biases.end());
        for (std::size_t i = 0; i < fan_in; ++i) {
            const double xi = (*in)[i];
            const double* wrow = layer.weights.data() + i * fan_out;
            for (std::size_t j = 0; j < fan_out; ++j) pre[j] += xi * wrow[j];
        }
        post.resize(fan_out);
        for (std::size_t j = 0; j < fan_out; ++j) post[j] = apply_act(layer.activation, pre[j], j);
        in = &post;
    }
}

ForwardTrace forward(const Network& net, std::span<const double> x) {
    ForwardTrace trace;
    forward(net, x, trace);
    return trace;
}

Gradients make_gradients(const Network& net) {
    Gradients g;
    g.weights.reserve(net.layers.size());
    g.biases.reserve(net.layers.size());
    for (const Layer& layer : net.layers) {
        g.weights.emplace_back(layer.weights.rows(), layer.weights.cols());
        g.biases.emplace_back(layer.biases.size(), 0.0);
    }
    return g;
}

void backward(const Network& net, const ForwardTrace& trace, std::span<const double> loss_grad,
              Gradients& out) {
    const std::size_t n_layers = net.layers.size();
    if (trace.pre.size() != n_layers || trace.post.size() != n_layers ||
        trace.input.size() != net.input_width())
        throw ConfigError("backward: trace does not match network");
    for (std::size_t l = 0; l < n_layers; ++l)
        if (trace.pre[l].size() != net.layers[l].weights.cols() ||
            trace.post[l].size() != net.layers[l].weights.cols())
            throw ConfigError("backward: trace shape mismatch");
    if (loss_grad.size() != net.output_width())
        throw ConfigError("backward: loss gradient width mismatch");
    if (out.weights.size() != n_layers) out = make_gradients(net);

    std::vector<double> delta(loss_grad.begin(), loss_grad.end());
    std::vector<double> prev_delta;
    for (std::size_t l = n_layers; l-- > 0;) {
        const Layer& layer = net.layers[l];
        const std::size_t fan_in = layer.weights.rows();
        const std::size_t fan_out = layer.weights.cols();

        // delta currently holds dLoss/dPost for layer l; fold in the activation.
        for (std::size_t j = 0; j < fan_out; ++j)
            delta[j] *= act_derivative(layer.activation, trace.pre[l][j], trace.post[l][j]);

        const std::vector<double>& in = (l == 0) ? trace.input : trace.post[l - 1];
        Matrix& dw = out.weights[l];
        for (std::size_t i = 0; i < fan_in; ++i) {
            const double xi = in[i];
            double* drow = dw.data() + i * fan_out;
            for (std::size_t j = 0; j < fan_out; ++j) drow[j] = xi * delta[j];
        }
        for (std::size_t j = 0; j < fan_out; ++j) out.biases[l][j] = delta[j];

        if (l > 0) {
            prev_delta.assign(fan_in, 0.0);
            for (std::size_t i = 0; i < fan_in; ++i) {
                const double* wrow = layer.weights.data() + i * fan_out;
                double acc = 0.0;
                for (std::size_t j = 0; j < fan_out; ++j) acc += wrow[j] * delta[j];
                prev_delta[i] = acc;
            }
            delta.swap(prev_delta);
        }
    }
}

Gradients backward(const Network& net, const ForwardTrace& trace,
                   std::span<const double> loss_grad) {
    Gradients g = make_gradients(net);
    backward(net, trace, loss_grad, g);
    return g;
}

int ltu_output(std::span<const double> v, double theta, std::span<const double> x) {
    if (v.size() != x.size()) throw ConfigError("ltu_output: size mismatch");
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * x[i];
    return dot > theta ? 1 : 0;
}

double ltu_threshold(std::span<const double> v, double beta) {
    std::size_t negatives = 0;
    for (double w : v) {
        if (w == -1.0)
            ++negatives;
        else if (w != 1.0)
            throw ConfigError("ltu_threshold: weights must be exactly +1 or -1");
    }
    return static_cast<double>(v.size()) * beta - static_cast<double>(negatives);
}

}  // namespace cbp
