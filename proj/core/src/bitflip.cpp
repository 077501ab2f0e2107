#include "cbp/bitflip.hpp"

#include <random>

#include "cbp/errors.hpp"

namespace cbp {

namespace {

BitFlipConfig validated(const BitFlipConfig& cfg) {
    if (cfg.m < 1 || cfg.f < 0 || cfg.f > cfg.m)
        throw ConfigError("bitflip: need 0 <= f <= m and m >= 1");
    if (cfg.flip_period < 1) throw ConfigError("bitflip: flip period must be >= 1");
    if (cfg.target_width < 1) throw ConfigError("bitflip: target width must be >= 1");
    if (cfg.beta < 0.0 || cfg.beta > 1.0) throw ConfigError("bitflip: beta must be in [0, 1]");
    return cfg;
}

// Target network: m+1 inputs (bias bit appended), one hidden LTU layer, one
// linear output. Every weight is +-1; hidden thresholds follow the LTU rule;
// no biases anywhere.
Network build_target(const BitFlipConfig& cfg) {
    Rng rng = make_rng(cfg.seed, RngStream::Target);
    std::uniform_int_distribution<int> coin(0, 1);
    auto draw_sign = [&] { return coin(rng) == 0 ? -1.0 : 1.0; };

    const std::size_t n_in = static_cast<std::size_t>(cfg.m) + 1;
    const std::size_t n_hidden = static_cast<std::size_t>(cfg.target_width);

    Network net;
    net.layers.resize(2);
    Layer& hidden = net.layers[0];
    hidden.weights = Matrix(n_in, n_hidden);
    hidden.biases.assign(n_hidden, 0.0);
    for (std::size_t i = 0; i < n_in; ++i)
        for (std::size_t j = 0; j < n_hidden; ++j) hidden.weights(i, j) = draw_sign();

    std::vector<double> thresholds(n_hidden);
    std::vector<double> column(n_in);
    for (std::size_t j = 0; j < n_hidden; ++j) {
        for (std::size_t i = 0; i < n_in; ++i) column[i] = hidden.weights(i, j);
        thresholds[j] = ltu_threshold(column, cfg.beta);
    }
    hidden.activation = Activation::ltu(std::move(thresholds));

    Layer& out = net.layers[1];
    out.weights = Matrix(n_hidden, 1);
    out.biases.assign(1, 0.0);
    out.activation = Activation::linear();
    for (std::size_t j = 0; j < n_hidden; ++j) out.weights(j, 0) = draw_sign();
    return net;
}

}  // namespace

BitFlipEnv::BitFlipEnv(const BitFlipConfig& cfg)
    : cfg_(validated(cfg)),
      target_(build_target(cfg_)),
      rng_flip_(make_rng(cfg.seed, RngStream::Flip)),
      rng_noise_(make_rng(cfg.seed, RngStream::Noise)) {
    std::uniform_int_distribution<int> coin(0, 1);
    flip_bits_.resize(static_cast<std::size_t>(cfg.f));
    for (auto& b : flip_bits_) b = static_cast<std::uint8_t>(coin(rng_flip_));
    target_in_.assign(static_cast<std::size_t>(cfg.m) + 1, 0.0);
    target_in_.back() = 1.0;  // constant bias bit
}

void BitFlipEnv::next(Sample& out) {
    ++step_;
    if (cfg_.f > 0 && step_ % cfg_.flip_period == 0) {
        std::uniform_int_distribution<int> pick(0, cfg_.f - 1);
        const int i = pick(rng_flip_);
        flip_bits_[static_cast<std::size_t>(i)] ^= 1u;
    }

    out.x.resize(static_cast<std::size_t>(cfg_.m));
    for (int i = 0; i < cfg_.f; ++i)
        out.x[static_cast<std::size_t>(i)] = flip_bits_[static_cast<std::size_t>(i)];
    std::uniform_int_distribution<int> coin(0, 1);
    for (int i = cfg_.f; i < cfg_.m; ++i)
        out.x[static_cast<std::size_t>(i)] = static_cast<double>(coin(rng_noise_));

    for (int i = 0; i < cfg_.m; ++i)
        target_in_[static_cast<std::size_t>(i)] = out.x[static_cast<std::size_t>(i)];
    forward(target_, target_in_, target_trace_);
    out.target = target_trace_.output()[0];
    out.label = 0;
}

}  // namespace cbp
