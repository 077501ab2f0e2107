#include "cbp/gnt.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cbp/errors.hpp"

namespace cbp {

const char* utility_name(UtilityKind kind) {
    switch (kind) {
        case UtilityKind::Random: return "random";
        case UtilityKind::WeightMagnitude: return "weight_magnitude";
        case UtilityKind::Contribution: return "contribution";
        case UtilityKind::MeanCorrectedContribution: return "mean_corrected_contribution";
        case UtilityKind::Adaptation: return "adaptation";
        case UtilityKind::Overall: return "overall";
    }
    return "?";
}

namespace {

inline double sum_abs(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

inline double running(double prev, double instant, double eta) {
    return (1.0 - eta) * instant + eta * prev;
}

inline double f_hat_of(double f_pre, double eta, std::int64_t age) {
    if (age <= 0) return 0.0;  // fresh feature, no history yet
    return f_pre / (1.0 - std::pow(eta, static_cast<double>(age)));
}

inline double floored(double sum_in) { return std::max(sum_in, kMinInputWeightSum); }

}  // namespace

GntState make_gnt_state(const Network& net, std::uint64_t seed) {
    GntState st;
    st.layers.resize(net.hidden_layer_count());
    for (std::size_t l = 0; l < st.layers.size(); ++l)
        st.layers[l].features.assign(net.width_of(l), FeatureStats{});
    st.rng = make_rng(seed, RngStream::Gnt);
    return st;
}

double update_contribution(double c, double h, std::span<const double> out_weights, double eta) {
    return running(c, std::abs(h) * sum_abs(out_weights), eta);
}

MeanCorrectedResult update_mean_corrected(double z, double f, double h,
                                          std::span<const double> out_weights, double eta,
                                          std::int64_t age) {
    const double f_hat = f_hat_of(f, eta, age);
    MeanCorrectedResult r;
    r.z = running(z, std::abs(h - f_hat) * sum_abs(out_weights), eta);
    r.f = running(f, h, eta);
    return r;
}

double update_adaptation(double a_util, std::span<const double> in_weights, double eta) {
    return running(a_util, 1.0 / floored(sum_abs(in_weights)), eta);
}

OverallResult update_overall(double u, double f, double h, std::span<const double> in_weights,
                             std::span<const double> out_weights, double eta, std::int64_t age) {
    const double f_hat = f_hat_of(f, eta, age);
    const double y = std::abs(h - f_hat) * sum_abs(out_weights) / floored(sum_abs(in_weights));
    OverallResult r;
    r.u = running(u, y, eta);
    r.u_hat = f_hat_of(u, eta, age);  // pre-update numerator, same correction as f_hat
    r.f = running(f, h, eta);
    return r;
}

double update_random_utility(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double update_weight_magnitude_utility(double wm, std::span<const double> out_weights,
                                       double eta) {
    return running(wm, sum_abs(out_weights), eta);
}

void update_layer_utilities(GntState& state, const Network& net, const ForwardTrace& trace,
                            std::size_t layer, const GntConfig& cfg) {
    if (layer >= state.layers.size() || layer + 1 >= net.layers.size())
        throw ConfigError("update_layer_utilities: bad layer");
    GntLayerState& ls = state.layers[layer];
    const Matrix& w_in = net.layers[layer].weights;
    const Matrix& w_out = net.layers[layer + 1].weights;
    const std::vector<double>& h = trace.post[layer];
    const double eta = cfg.decay_rate;
    const std::size_t n = ls.features.size();
    if (h.size() != n || w_out.rows() != n || w_in.cols() != n)
        throw ConfigError("update_layer_utilities: shape mismatch");

    const bool needs_in = cfg.utility == UtilityKind::Adaptation ||
                          cfg.utility == UtilityKind::Overall;
    if (needs_in) {
        ls.in_sums.assign(n, 0.0);
        for (std::size_t j = 0; j < w_in.rows(); ++j) {
            const double* row = w_in.data() + j * n;
            for (std::size_t i = 0; i < n; ++i) ls.in_sums[i] += std::abs(row[i]);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        FeatureStats& fs = ls.features[i];
        fs.age += 1;
        fs.pow_eta *= eta;
        if (fs.pow_eta < 1e-300) fs.pow_eta = 0.0;
        const double denom = 1.0 - fs.pow_eta;  // > 0 once age >= 1

        switch (cfg.utility) {
            case UtilityKind::Random: {
                fs.u = update_random_utility(state.rng);
                fs.score = fs.u;
                break;
            }
            case UtilityKind::WeightMagnitude: {
                fs.score = fs.u / denom;
                fs.u = running(fs.u, sum_abs(w_out.row(i)), eta);
                break;
            }
            case UtilityKind::Contribution: {
                fs.score = fs.u / denom;
                fs.u = running(fs.u, std::abs(h[i]) * sum_abs(w_out.row(i)), eta);
                break;
            }
            case UtilityKind::MeanCorrectedContribution: {
                const double f_hat = fs.f / denom;
                fs.score = fs.u / denom;
                fs.u = running(fs.u, std::abs(h[i] - f_hat) * sum_abs(w_out.row(i)), eta);
                break;
            }
            case UtilityKind::Adaptation: {
                fs.score = fs.u / denom;
                fs.u = running(fs.u, 1.0 / floored(ls.in_sums[i]), eta);
                break;
            }
            case UtilityKind::Overall: {
                const double f_hat = fs.f / denom;
                const double y =
                    std::abs(h[i] - f_hat) * sum_abs(w_out.row(i)) / floored(ls.in_sums[i]);
                fs.score = fs.u / denom;
                fs.u = running(fs.u, y, eta);
                break;
            }
        }
        fs.f = running(fs.f, h[i], eta);
    }
}

std::vector<std::size_t> select_replacements(GntState& state, std::size_t layer,
                                             const GntConfig& cfg) {
    GntLayerState& ls = state.layers[layer];
    std::size_t n_eligible = 0;
    for (const FeatureStats& fs : ls.features)
        if (fs.age > cfg.maturity_threshold) ++n_eligible;

    ls.eligible_steps += static_cast<std::int64_t>(n_eligible);
    const auto budget = static_cast<std::int64_t>(
        std::floor(static_cast<double>(ls.eligible_steps) * cfg.replacement_rate));
    const std::int64_t due = budget - ls.replaced;
    if (due <= 0 || n_eligible == 0) return {};
    const std::size_t k = std::min(static_cast<std::size_t>(due), n_eligible);

    std::vector<std::pair<double, std::size_t>> eligible;
    eligible.reserve(n_eligible);
    for (std::size_t i = 0; i < ls.features.size(); ++i)
        if (ls.features[i].age > cfg.maturity_threshold)
            eligible.emplace_back(ls.features[i].score, i);
    std::sort(eligible.begin(), eligible.end());  // (score, index): ties go to lowest index

    std::vector<std::size_t> out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = eligible[j].second;
    ls.replaced += static_cast<std::int64_t>(k);
    return out;
}

void replace_features(Network& net, AdamState* adam, GntState& state, std::size_t layer,
                      std::span<const std::size_t> idx, Rng& rng) {
    if (layer >= state.layers.size() || layer + 1 >= net.layers.size())
        throw ConfigError("replace_features: bad layer");
    Layer& in_layer = net.layers[layer];
    Layer& out_layer = net.layers[layer + 1];
    const std::size_t n = in_layer.weights.cols();
    const double bound = in_layer.init_bound;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<WeightId> touched;
    for (std::size_t i : idx) {
        if (i >= n) throw ConfigError("replace_features: feature index out of range");

        for (std::size_t j = 0; j < in_layer.weights.rows(); ++j) {
            double w;
            do {
                w = bound * (2.0 * unit(rng) - 1.0);
            } while (std::abs(w) >= bound);
            in_layer.weights(j, i) = w;
            if (adam) touched.push_back({layer, j, i, false});
        }
        in_layer.biases[i] = 0.0;
        if (adam) touched.push_back({layer, 0, i, true});

        for (std::size_t k = 0; k < out_layer.weights.cols(); ++k) {
            out_layer.weights(i, k) = 0.0;
            if (adam) touched.push_back({layer + 1, i, k, false});
        }

        FeatureStats& fs = state.layers[layer].features[i];
        fs.u = 0.0;
        fs.f = 0.0;
        fs.score = 0.0;
        fs.age = 0;
        fs.pow_eta = 1.0;
    }
    if (adam) reset_weight_state(*adam, touched);
}

void cbp_step(Network& net, const ForwardTrace& trace, const Gradients& grads, Optimizer& opt,
              GntState& state, const GntConfig& cfg) {
    if (state.layers.size() != net.hidden_layer_count())
        throw ConfigError("cbp_step: state does not match network");
    optimizer_step(opt, net, grads);
    AdamState* adam = adam_state(opt);
    for (std::size_t l = 0; l < state.layers.size(); ++l) {
        update_layer_utilities(state, net, trace, l, cfg);
        const std::vector<std::size_t> idx = select_replacements(state, l, cfg);
        if (!idx.empty()) replace_features(net, adam, state, l, idx, state.rng);
    }
}

}  // namespace cbp
