// Microbenchmarks for the hot paths: the learner forward/backward passes at
// the two experiment scales, the optimizer steps, the generate-and-test pass,
// and the two sample streams.

#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "cbp/bitflip.hpp"
#include "cbp/gnt.hpp"
#include "cbp/mnist.hpp"
#include "cbp/network.hpp"
#include "cbp/optim.hpp"

namespace {

using namespace cbp;

Network small_net() {
    const std::size_t widths[] = {20, 5, 1};
    const Activation acts[] = {Activation::tanh(), Activation::linear()};
    return init_network(widths, acts, 1);
}

Network mnist_net() {
    const std::size_t widths[] = {784, 100, 100, 100, 10};
    const Activation acts[] = {Activation::relu(), Activation::relu(), Activation::relu(),
                               Activation::linear()};
    return init_network(widths, acts, 1);
}

std::vector<double> random_input(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = unit(rng);
    return x;
}

void fill_random(Gradients& g, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 0.01);
    for (auto& m : g.weights)
        for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    for (auto& b : g.biases)
        for (auto& v : b) v = n(rng);
}

template <Network (*MakeNet)()>
void BM_forward(benchmark::State& state) {
    const Network net = MakeNet();
    const auto x = random_input(net.input_width(), 7);
    ForwardTrace trace;
    for (auto _ : state) {
        forward(net, x, trace);
        benchmark::DoNotOptimize(trace.post.back().data());
    }
}

template <Network (*MakeNet)()>
void BM_forward_backward(benchmark::State& state) {
    const Network net = MakeNet();
    const auto x = random_input(net.input_width(), 7);
    std::vector<double> dL(net.output_width(), 0.5);
    ForwardTrace trace;
    Gradients grads = make_gradients(net);
    for (auto _ : state) {
        forward(net, x, trace);
        backward(net, trace, dL, grads);
        benchmark::DoNotOptimize(grads.weights.back().data());
    }
}

template <Network (*MakeNet)()>
void BM_sgd_step(benchmark::State& state) {
    Network net = MakeNet();
    Gradients grads = make_gradients(net);
    fill_random(grads, 3);
    const SgdConfig cfg{1e-6, 0.0};  // tiny step so weights stay finite
    for (auto _ : state) {
        sgd_step(net, grads, cfg);
        benchmark::DoNotOptimize(net.layers[0].weights.data());
    }
}

template <Network (*MakeNet)()>
void BM_adam_step(benchmark::State& state) {
    Network net = MakeNet();
    Gradients grads = make_gradients(net);
    fill_random(grads, 3);
    AdamState adam = make_adam_state(net, {});
    for (auto _ : state) {
        adam_step(net, grads, adam, 1e-6);
        benchmark::DoNotOptimize(net.layers[0].weights.data());
    }
}

// The full per-step cost of continual backprop on the small regression
// learner: gradient step plus utility update, selection and (rare)
// replacement. Compare against BM_sgd_step<small_net> for the overhead.
void BM_cbp_step(benchmark::State& state) {
    Network net = small_net();
    GntState gnt = make_gnt_state(net, 2);
    GntConfig cfg;
    Optimizer opt = SgdOptimizer({1e-6, 0.0});
    const auto x = random_input(net.input_width(), 7);
    std::vector<double> dL(1, 0.5);
    ForwardTrace trace;
    Gradients grads = make_gradients(net);
    for (auto _ : state) {
        forward(net, x, trace);
        backward(net, trace, dL, grads);
        cbp_step(net, trace, grads, opt, gnt, cfg);
        benchmark::DoNotOptimize(net.layers[0].weights.data());
    }
}

void BM_bitflip_next(benchmark::State& state) {
    BitFlipEnv env(BitFlipConfig{});
    Sample s;
    for (auto _ : state) {
        env.next(s);
        benchmark::DoNotOptimize(s.target);
    }
}

void BM_mnist_next(benchmark::State& state) {
    auto data = std::make_shared<MnistData>();
    data->count = 2048;
    data->width = 784;
    data->images.resize(data->count * data->width);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    for (auto& v : data->images) v = unit(rng);
    data->labels.resize(data->count);
    for (std::size_t i = 0; i < data->count; ++i)
        data->labels[i] = static_cast<std::uint8_t>(i % 10);

    MnistStream stream(data, MnistStreamConfig{512, 0});
    Sample s;
    for (auto _ : state) {
        stream.next(s);
        benchmark::DoNotOptimize(s.x.data());
    }
}

BENCHMARK(BM_forward<small_net>)->Name("forward/20x5x1");
BENCHMARK(BM_forward<mnist_net>)->Name("forward/784x100x100x100x10");
BENCHMARK(BM_forward_backward<small_net>)->Name("forward_backward/20x5x1");
BENCHMARK(BM_forward_backward<mnist_net>)->Name("forward_backward/784x100x100x100x10");
BENCHMARK(BM_sgd_step<small_net>)->Name("sgd_step/20x5x1");
BENCHMARK(BM_sgd_step<mnist_net>)->Name("sgd_step/784x100x100x100x10");
BENCHMARK(BM_adam_step<small_net>)->Name("adam_step/20x5x1");
BENCHMARK(BM_adam_step<mnist_net>)->Name("adam_step/784x100x100x100x10");
BENCHMARK(BM_cbp_step)->Name("cbp_step/20x5x1");
BENCHMARK(BM_bitflip_next)->Name("stream/bitflip_next");
BENCHMARK(BM_mnist_next)->Name("stream/mnist_next");

}  // namespace

BENCHMARK_MAIN();
