#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbp/network.hpp"
#include "cbp/optim.hpp"
#include "cbp/rng.hpp"

namespace cbp {

enum class UtilityKind {
    Random,
    WeightMagnitude,
    Contribution,
    MeanCorrectedContribution,
    Adaptation,
    Overall,
};

const char* utility_name(UtilityKind kind);

struct GntConfig {
    double replacement_rate = 1e-4;     // rho, fraction of a layer replaced per step
    double decay_rate = 0.99;           // eta of the running utility averages
    std::int64_t maturity_threshold = 100;  // features with age <= this are protected
    UtilityKind utility = UtilityKind::Overall;
};

// Denominator floor for the adaptation term; a layer whose input weights sum
// to less than this is treated as having that sum.
inline constexpr double kMinInputWeightSum = 1e-8;

struct FeatureStats {
    double u = 0.0;      // running utility (meaning depends on the utility kind)
    double f = 0.0;      // running average activation
    double score = 0.0;  // bias-corrected utility from the latest update; selection key
    std::int64_t age = 0;
    double pow_eta = 1.0;  // eta^age, maintained incrementally
};

// The replacement budget is floor(eligible_steps * rho) - replaced, which
// carries fractional budgets across steps without floating-point drift: five
// eligible features at rho = 1e-4 yield one replacement exactly every 2000
// steps.
struct GntLayerState {
    std::vector<FeatureStats> features;
    std::int64_t eligible_steps = 0;  // cumulative eligible count over all select calls
    std::int64_t replaced = 0;        // features replaced so far
    std::vector<double> in_sums;      // scratch for per-feature input-weight sums
};

struct GntState {
    std::vector<GntLayerState> layers;  // one per hidden layer
    Rng rng;                            // feature redraws and random-utility draws
};

GntState make_gnt_state(const Network& net, std::uint64_t seed);

/// Running utility updates. Each returns the new running value(s); the
/// *_hat outputs are bias-corrected with the pre-update numerator, which is
/// what selection at the same step sees.
double update_contribution(double c, double h, std::span<const double> out_weights, double eta);

struct MeanCorrectedResult {
    double z;
    double f;
};
MeanCorrectedResult update_mean_corrected(double z, double f, double h,
                                          std::span<const double> out_weights, double eta,
                                          std::int64_t age);

double update_adaptation(double a_util, std::span<const double> in_weights, double eta);

struct OverallResult {
    double u;
    double f;
    double u_hat;
};
OverallResult update_overall(double u, double f, double h, std::span<const double> in_weights,
                             std::span<const double> out_weights, double eta, std::int64_t age);

double update_random_utility(Rng& rng);

double update_weight_magnitude_utility(double wm, std::span<const double> out_weights, double eta);

/// Advances every feature's age in hidden layer `layer` and refreshes u, f
/// and score from the current weights and the traced activations.
void update_layer_utilities(GntState& state, const Network& net, const ForwardTrace& trace,
                            std::size_t layer, const GntConfig& cfg);

/// Accumulates the eligible count into the layer's replacement budget and
/// returns the due number of eligible features with the smallest
/// bias-corrected utility, ties broken by lowest index.
std::vector<std::size_t> select_replacements(GntState& state, std::size_t layer,
                                             const GntConfig& cfg);

/// Replaces the listed features of hidden layer `layer`: incoming weights are
/// redrawn from the layer's init distribution, the bias and all outgoing
/// weights are zeroed, u/f/age reset to 0, and any Adam state of the touched
/// entries is cleared.
void replace_features(Network& net, AdamState* adam, GntState& state, std::size_t layer,
                      std::span<const std::size_t> idx, Rng& rng);

/// One Continual Backprop step: gradient update followed by the
/// generate-and-test pass (age, utility, eligibility, selection, replacement)
/// over every hidden layer in order.
void cbp_step(Network& net, const ForwardTrace& trace, const Gradients& grads, Optimizer& opt,
              GntState& state, const GntConfig& cfg);

}  // namespace cbp
