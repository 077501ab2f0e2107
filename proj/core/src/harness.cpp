#include "cbp/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "cbp/errors.hpp"

namespace cbp {

namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

std::unique_ptr<SampleStream> make_stream(const ExperimentConfig& cfg, std::uint64_t seed) {
    switch (cfg.problem) {
        case Problem::BitFlip: {
            BitFlipConfig bc = cfg.bitflip;
            bc.seed = seed;
            return std::make_unique<BitFlipEnv>(bc);
        }
        case Problem::PermutedMnist: {
            if (!cfg.mnist_data) throw ConfigError("permuted mnist: no dataset loaded");
            MnistStreamConfig mc = cfg.mnist;
            mc.seed = seed;
            return std::make_unique<MnistStream>(cfg.mnist_data, mc);
        }
    }
    throw ConfigError("unknown problem kind");
}

Activation learner_activation(Act kind) {
    switch (kind) {
        case Act::Tanh: return Activation::tanh();
        case Act::Sigmoid: return Activation::sigmoid();
        case Act::Relu: return Activation::relu();
        case Act::LeakyRelu: return Activation::leaky_relu();
        case Act::Elu: return Activation::elu();
        case Act::Swish: return Activation::swish();
        case Act::Linear: return Activation::linear();
        case Act::Ltu: break;
    }
    throw ConfigError("ltu is reserved for target networks");
}

double mean_abs_weight(const Matrix& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) s += std::abs(w(i, j));
    return s / (double(w.rows()) * double(w.cols()));
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
    if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
    if (cfg.bin_size < 1 || cfg.steps % cfg.bin_size != 0)
        throw ConfigError("bin size must be >= 1 and divide steps");
    if (cfg.step_size <= 0.0) throw ConfigError("step size must be positive");
    if (cfg.weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
    if (cfg.algorithm == Algorithm::Bp && cfg.weight_decay != 0.0)
        throw ConfigError("bp takes no weight decay; use bp_l2");
    if (cfg.algorithm == Algorithm::Cbp &&
        (cfg.gnt.replacement_rate < 0.0 || cfg.gnt.decay_rate < 0.0 || cfg.gnt.decay_rate >= 1.0))
        throw ConfigError("cbp needs replacement rate >= 0 and decay rate in [0, 1)");
    if (cfg.seeds.empty()) throw ConfigError("seed list must not be empty");
}

const char* problem_name(Problem p) {
    switch (p) {
        case Problem::BitFlip: return "bitflip";
        case Problem::PermutedMnist: return "permuted_mnist";
    }
    return "?";
}

const char* algorithm_name(Algorithm a) {
    switch (a) {
        case Algorithm::Bp: return "bp";
        case Algorithm::BpL2: return "bp_l2";
        case Algorithm::Cbp: return "cbp";
    }
    return "?";
}

const char* optimizer_name(OptKind o) {
    switch (o) {
        case OptKind::Sgd: return "sgd";
        case OptKind::Adam: return "adam";
    }
    return "?";
}

RunMetrics run_online(const ExperimentConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);

    auto stream = make_stream(cfg, seed);
    const bool classify = stream->is_classification();
    const std::size_t n_out = classify ? stream->output_dim() : 1;

    std::vector<std::size_t> widths;
    widths.push_back(stream->input_dim());
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(n_out);
    std::vector<Activation> acts(cfg.hidden.size(), learner_activation(cfg.activation));
    acts.push_back(Activation::linear());

    Network net = init_network(widths, acts, seed);
    Optimizer opt =
        cfg.optimizer == OptKind::Sgd
            ? Optimizer(SgdOptimizer({cfg.step_size, cfg.weight_decay}))
            : Optimizer(AdamOptimizer(
                  net, {cfg.step_size, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay}));
    GntState gnt;
    if (cfg.algorithm == Algorithm::Cbp) gnt = make_gnt_state(net, seed);

    const std::size_t n_hidden_layers = net.hidden_layer_count();
    Sample s;
    ForwardTrace trace;
    Gradients grads = make_gradients(net);
    std::vector<double> dout(n_out);
    std::vector<double> probs(classify ? n_out : 0);

    RunMetrics rm;
    rm.seed = seed;
    rm.bins.reserve(static_cast<std::size_t>(cfg.steps / cfg.bin_size));
    std::uint64_t ck = kFnvOffset;

    double bin_loss = 0.0, bin_acc = 0.0, bin_ig = 0.0;
    std::vector<double> bin_sat(n_hidden_layers, 0.0);

    for (long t = 1; t <= cfg.steps; ++t) {
        stream->next(s);
        ck = fnv1a(ck, s.x.data(), s.x.size() * sizeof(double));
        ck = fnv1a(ck, &s.target, sizeof s.target);
        ck = fnv1a(ck, &s.label, sizeof s.label);

        forward(net, s.x, trace);
        const std::vector<double>& out = trace.output();

        double loss;
        if (classify) {
            double zmax = out[0];
            for (double z : out) zmax = std::max(zmax, z);
            double sum = 0.0;
            for (std::size_t j = 0; j < n_out; ++j) {
                probs[j] = std::exp(out[j] - zmax);
                sum += probs[j];
            }
            const std::size_t label = static_cast<std::size_t>(s.label);
            loss = std::log(sum) - (out[label] - zmax);
            for (std::size_t j = 0; j < n_out; ++j) dout[j] = probs[j] / sum;
            dout[label] -= 1.0;
            std::size_t best = 0;
            for (std::size_t j = 1; j < n_out; ++j)
                if (out[j] > out[best]) best = j;
            if (best == label) bin_acc += 1.0;
        } else {
            const double err = out[0] - s.target;
            loss = err * err;
            dout[0] = 2.0 * err;
        }

        if (!std::isfinite(loss)) {
            rm.diverged = true;
            rm.divergence_step = t;
            break;
        }
        rm.total_loss += loss;
        bin_loss += loss;

        backward(net, trace, dout, grads);

        if (cfg.record_saturation) {
            for (std::size_t l = 0; l < n_hidden_layers; ++l) {
                const auto& post = trace.post[l];
                std::size_t cnt = 0;
                for (double h : post)
                    if (std::abs(h) > cfg.saturation_threshold) ++cnt;
                bin_sat[l] += double(cnt) / double(post.size());
            }
        }
        if (cfg.record_input_grad) bin_ig += input_grad_magnitude(grads);

        try {
            if (cfg.algorithm == Algorithm::Cbp)
                cbp_step(net, trace, grads, opt, gnt, cfg.gnt);
            else
                optimizer_step(opt, net, grads);
        } catch (const NumericError&) {
            rm.diverged = true;
            rm.divergence_step = t;
            break;
        }

        if (t % cfg.bin_size == 0) {
            BinMetrics bm;
            bm.loss = bin_loss / double(cfg.bin_size);
            bm.accuracy = classify ? bin_acc / double(cfg.bin_size) : 0.0;
            if (cfg.record_weight_mag) bm.weight_mag = mean_abs_weight(net.layers.back().weights);
            bm.saturation.assign(n_hidden_layers, 0.0);
            if (cfg.record_saturation)
                for (std::size_t l = 0; l < n_hidden_layers; ++l)
                    bm.saturation[l] = bin_sat[l] / double(cfg.bin_size);
            if (cfg.record_input_grad) bm.input_grad_mag = bin_ig / double(cfg.bin_size);
            rm.bins.push_back(std::move(bm));
            bin_loss = bin_acc = bin_ig = 0.0;
            std::fill(bin_sat.begin(), bin_sat.end(), 0.0);
        }
    }

    rm.data_checksum = ck;
    return rm;
}

std::vector<double> saturation_fraction(const ForwardTrace& trace, double threshold) {
    if (trace.post.empty()) return {};
    std::vector<double> out(trace.post.size() - 1);
    for (std::size_t l = 0; l + 1 < trace.post.size(); ++l) {
        const auto& post = trace.post[l];
        std::size_t cnt = 0;
        for (double h : post)
            if (std::abs(h) > threshold) ++cnt;
        out[l] = post.empty() ? 0.0 : double(cnt) / double(post.size());
    }
    return out;
}

double input_grad_magnitude(const Gradients& grads) {
    if (grads.weights.empty()) return 0.0;
    const Matrix& g = grads.weights.front();
    double s = 0.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) s += std::abs(g(i, j));
    return s / (double(g.rows()) * double(g.cols()));
}

std::vector<MeanSe> aggregate(const std::vector<std::vector<double>>& series) {
    if (series.empty()) return {};
    const std::size_t len = series.front().size();
    for (const auto& s : series)
        if (s.size() != len) throw ConfigError("aggregate: series lengths differ");
    const double n = double(series.size());
    std::vector<MeanSe> out(len);
    for (std::size_t i = 0; i < len; ++i) {
        double sum = 0.0;
        for (const auto& s : series) sum += s[i];
        const double mean = sum / n;
        double var = 0.0;
        if (series.size() > 1) {
            for (const auto& s : series) var += (s[i] - mean) * (s[i] - mean);
            var /= (n - 1.0);
        }
        out[i] = {mean, std::sqrt(var / n)};
    }
    return out;
}

std::vector<SweepCell> sweep(std::span<const NamedConfig> configs, int jobs) {
    struct Task {
        std::size_t ci;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::size_t ci = 0; ci < configs.size(); ++ci)
        for (std::uint64_t seed : configs[ci].cfg.seeds) tasks.push_back({ci, seed});

    std::vector<SweepCell> cells(tasks.size());
    auto run_one = [&](std::size_t i) {
        SweepCell& cell = cells[i];
        cell.config_id = configs[tasks[i].ci].id;
        cell.seed = tasks[i].seed;
        try {
            cell.metrics = run_online(configs[tasks[i].ci].cfg, tasks[i].seed);
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    };

    if (jobs <= 1 || tasks.size() <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_one(i);
        return cells;
    }

    std::atomic<std::size_t> next{0};
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), tasks.size());
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t w = 0; w < n_threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < tasks.size(); i = next.fetch_add(1))
                run_one(i);
        });
    for (auto& th : pool) th.join();
    return cells;
}

void write_runs_csv(const std::string& path, std::span<const SweepCell> cells) {
    std::size_t max_hidden = 0;
    for (const auto& c : cells)
        for (const auto& b : c.metrics.bins) max_hidden = std::max(max_hidden, b.saturation.size());

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError(tmp + ": cannot open for writing");
        out << "config_id,seed,bin,loss,accuracy,weight_mag";
        for (std::size_t l = 1; l <= max_hidden; ++l) out << ",sat_l" << l;
        out << ",input_grad_mag\n";
        char buf[32];
        auto num = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ',' << buf;
        };
        for (const auto& c : cells) {
            if (!c.ok) continue;
            for (std::size_t b = 0; b < c.metrics.bins.size(); ++b) {
                const BinMetrics& bm = c.metrics.bins[b];
                out << c.config_id << ',' << c.seed << ',' << b;
                num(bm.loss);
                num(bm.accuracy);
                num(bm.weight_mag);
                for (std::size_t l = 0; l < max_hidden; ++l)
                    num(l < bm.saturation.size() ? bm.saturation[l] : 0.0);
                num(bm.input_grad_mag);
                out << '\n';
            }
        }
        if (!out) throw DataError(tmp + ": write failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace cbp
