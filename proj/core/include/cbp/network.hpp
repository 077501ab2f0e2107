#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cbp/activation.hpp"
#include "cbp/matrix.hpp"
#include "cbp/rng.hpp"

namespace cbp {

struct Layer {
    Matrix weights;              // [fan_in x fan_out]
    std::vector<double> biases;  // [fan_out]
    Activation activation;
    double init_bound = 0.0;  // bound of the U(-b, b) init; feature redraws reuse it
};

// Dense feed-forward network, L hidden layers plus a linear output layer.
struct Network {
    std::vector<Layer> layers;

    std::size_t input_width() const { return layers.front().weights.rows(); }
    std::size_t output_width() const { return layers.back().weights.cols(); }
    std::size_t hidden_layer_count() const { return layers.size() - 1; }
    std::size_t width_of(std::size_t layer) const { return layers[layer].weights.cols(); }
};

// Per-layer pre/post activations of one forward pass. Kept around because the
// backward pass and the feature-utility updates both need the unit outputs.
struct ForwardTrace {
    std::vector<double> input;
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;

    const std::vector<double>& output() const { return post.back(); }
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

/// Builds a network with uniform Kaiming init: each weight of a layer with
/// fan-in n is drawn i.i.d. from U(-b, b), b = gain * sqrt(3 / n); biases
/// start at zero. Deterministic under `seed`.
Network init_network(std::span<const std::size_t> widths, std::span<const Activation> acts,
                     std::uint64_t seed);

void forward(const Network& net, std::span<const double> x, ForwardTrace& trace);
ForwardTrace forward(const Network& net, std::span<const double> x);

/// Exact gradients of the loss w.r.t. every weight and bias; `loss_grad` is
/// dLoss/dOutput for the traced input.
void backward(const Network& net, const ForwardTrace& trace, std::span<const double> loss_grad,
              Gradients& out);
Gradients backward(const Network& net, const ForwardTrace& trace,
                   std::span<const double> loss_grad);

Gradients make_gradients(const Network& net);

/// LTU step: 1 iff v . x > theta (strict).
int ltu_output(std::span<const double> v, double theta, std::span<const double> x);

/// theta = (m+1) * beta - S with m+1 = |v| and S = #{v_i == -1}. Entries must
/// be exactly +1 or -1.
double ltu_threshold(std::span<const double> v, double beta);

}  // namespace cbp
