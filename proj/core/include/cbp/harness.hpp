#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cbp/activation.hpp"
#include "cbp/bitflip.hpp"
#include "cbp/gnt.hpp"
#include "cbp/mnist.hpp"
#include "cbp/network.hpp"
#include "cbp/optim.hpp"

namespace cbp {

enum class Problem { BitFlip, PermutedMnist };
enum class Algorithm { Bp, BpL2, Cbp };
enum class OptKind { Sgd, Adam };

const char* problem_name(Problem p);
const char* algorithm_name(Algorithm a);
const char* optimizer_name(OptKind o);

// One online learning experiment: a problem stream, a learner, an update rule
// and a step budget. The per-problem seeds inside `bitflip`/`mnist` are
// ignored; the run seed drives everything.
struct ExperimentConfig {
    Problem problem = Problem::BitFlip;
    BitFlipConfig bitflip;
    MnistStreamConfig mnist;
    std::shared_ptr<const MnistData> mnist_data;  // required for PermutedMnist
    std::string mnist_images, mnist_labels;       // provenance only, echoed in manifests

    std::vector<std::size_t> hidden = {5};  // empty = linear learner
    Act activation = Act::Tanh;

    Algorithm algorithm = Algorithm::Bp;
    OptKind optimizer = OptKind::Sgd;
    double step_size = 0.01;
    double weight_decay = 0.0;  // bp_l2 (and optionally cbp); must be 0 for bp
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    GntConfig gnt;  // cbp only

    long steps = 1000000;
    long bin_size = 20000;
    std::vector<std::uint64_t> seeds = {0};

    bool record_weight_mag = true;
    bool record_saturation = false;
    bool record_input_grad = false;
    double saturation_threshold = 0.9;
};

struct BinMetrics {
    double loss = 0.0;      // mean squared error, or mean cross-entropy
    double accuracy = 0.0;  // mean top-1 correctness; 0 for regression
    double weight_mag = 0.0;  // mean |w| of the output layer at bin end
    std::vector<double> saturation;  // per hidden layer, mean over the bin
    double input_grad_mag = 0.0;     // mean |g| of first-layer weights over the bin
};

struct RunMetrics {
    std::uint64_t seed = 0;
    std::vector<BinMetrics> bins;  // only bins completed before any divergence
    double total_loss = 0.0;       // sum of per-step losses
    bool diverged = false;
    long divergence_step = -1;            // 1-based step of first non-finite value
    std::uint64_t data_checksum = 0;      // FNV-1a over the consumed sample stream
};

/// Rejects configs that cannot run: non-positive sizes, bin size not dividing
/// the step count, weight decay under plain bp, bad gnt rates.
void validate_config(const ExperimentConfig& cfg);

/// Runs one seeded online experiment: per step draw a sample, record the
/// prequential loss, then update the learner. A non-finite loss or update
/// stops the run and flags it instead of throwing.
RunMetrics run_online(const ExperimentConfig& cfg, std::uint64_t seed);

/// Fraction of units per hidden layer with |output| strictly above the
/// threshold.
std::vector<double> saturation_fraction(const ForwardTrace& trace, double threshold = 0.9);

/// Mean |g| over the first weight matrix.
double input_grad_magnitude(const Gradients& grads);

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Per-index mean and standard error across equally long series. A single
/// series gets SE 0.
std::vector<MeanSe> aggregate(const std::vector<std::vector<double>>& series);

struct NamedConfig {
    std::string id;
    ExperimentConfig cfg;
};

struct SweepCell {
    std::string config_id;
    std::uint64_t seed = 0;
    RunMetrics metrics;
    bool ok = false;
    std::string error;  // exception text when !ok
};

/// Runs every (config, seed) pair — each config uses its own seed list — on
/// up to `jobs` threads. Cell order is deterministic regardless of scheduling;
/// per-cell failures are captured, not propagated.
std::vector<SweepCell> sweep(std::span<const NamedConfig> configs, int jobs = 1);

/// One row per (config_id, seed, bin): loss, accuracy, weight_mag,
/// sat_l1..sat_lK, input_grad_mag. Written to a temp file, then renamed.
void write_runs_csv(const std::string& path, std::span<const SweepCell> cells);

}  // namespace cbp
