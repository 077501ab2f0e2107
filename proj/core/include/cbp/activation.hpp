#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cbp/errors.hpp"

namespace cbp {

enum class Act { Tanh, Sigmoid, Relu, LeakyRelu, Elu, Swish, Ltu, Linear };

// Activation kind plus its parameters. LTU carries one threshold per unit
// and appears only in target networks; learners never use it.
struct Activation {
    Act kind = Act::Linear;
    double slope = 0.01;             // leaky_relu negative slope
    double alpha = 1.0;              // elu scale
    std::vector<double> thresholds;  // ltu, one per unit

    static Activation tanh() { return {Act::Tanh, 0.01, 1.0, {}}; }
    static Activation sigmoid() { return {Act::Sigmoid, 0.01, 1.0, {}}; }
    static Activation relu() { return {Act::Relu, 0.01, 1.0, {}}; }
    static Activation leaky_relu(double slope = 0.01) { return {Act::LeakyRelu, slope, 1.0, {}}; }
    static Activation elu(double alpha = 1.0) { return {Act::Elu, 0.01, alpha, {}}; }
    static Activation swish() { return {Act::Swish, 0.01, 1.0, {}}; }
    static Activation ltu(std::vector<double> thresholds) {
        return {Act::Ltu, 0.01, 1.0, std::move(thresholds)};
    }
    static Activation linear() { return {Act::Linear, 0.01, 1.0, {}}; }
};

const char* act_name(Act kind);

/// Kaiming gain for the uniform init bound b = gain * sqrt(3 / fan_in).
/// LTU and linear layers use gain 1.
double gain_for(const Activation& act);

inline double sigmoid_fn(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double apply_act(const Activation& a, double z, std::size_t unit) {
    switch (a.kind) {
        case Act::Tanh: return std::tanh(z);
        case Act::Sigmoid: return sigmoid_fn(z);
        case Act::Relu: return z > 0.0 ? z : 0.0;
        case Act::LeakyRelu: return z > 0.0 ? z : a.slope * z;
        case Act::Elu: return z > 0.0 ? z : a.alpha * (std::exp(z) - 1.0);
        case Act::Swish: return z * sigmoid_fn(z);
        case Act::Ltu: return z > a.thresholds[unit] ? 1.0 : 0.0;
        case Act::Linear: return z;
    }
    return z;
}

// Derivative w.r.t. the pre-activation; `post` is the already computed output
// so tanh/sigmoid avoid recomputing the transcendental.
inline double act_derivative(const Activation& a, double pre, double post) {
    switch (a.kind) {
        case Act::Tanh: return 1.0 - post * post;
        case Act::Sigmoid: return post * (1.0 - post);
        case Act::Relu: return pre > 0.0 ? 1.0 : 0.0;
        case Act::LeakyRelu: return pre > 0.0 ? 1.0 : a.slope;
        case Act::Elu: return pre > 0.0 ? 1.0 : post + a.alpha;
        case Act::Swish: {
            const double s = sigmoid_fn(pre);
            return s + pre * s * (1.0 - s);
        }
        case Act::Ltu: throw NumericError("LTU has no derivative; target networks are frozen");
        case Act::Linear: return 1.0;
    }
    return 1.0;
}

}  // namespace cbp
