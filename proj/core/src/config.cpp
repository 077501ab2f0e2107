#include "cbp/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "cbp/errors.hpp"
#include "json.hpp"

namespace cbp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed)
            if (key == a) {
                known = true;
                break;
            }
        if (!known) fail(where, "unknown key '" + key + "'");
    }
}

double get_num(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) fail(where, std::string("'") + key + "' must be a number");
    return v.get<double>();
}

long get_int(const json& obj, const char* key, long fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) fail(where, std::string("'") + key + "' must be an integer");
    return v.get<long>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) fail(where, std::string("'") + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_str(const json& obj, const char* key, const std::string& fallback,
                    const std::string& where) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) fail(where, std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::vector<std::size_t> parse_hidden(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "'hidden' must be an array of layer widths");
    std::vector<std::size_t> hidden;
    for (const json& e : v) {
        if (!e.is_number_integer() || e.get<long>() < 1)
            fail(where, "'hidden' entries must be positive integers");
        hidden.push_back(e.get<std::size_t>());
    }
    return hidden;
}

std::vector<std::uint64_t> parse_seeds(const json& v, const std::string& where) {
    std::vector<std::uint64_t> seeds;
    if (v.is_number_integer()) {
        const long n = v.get<long>();
        if (n < 1) fail(where, "'seeds' count must be >= 1");
        for (long i = 0; i < n; ++i) seeds.push_back(static_cast<std::uint64_t>(i));
        return seeds;
    }
    if (!v.is_array()) fail(where, "'seeds' must be an array or a count");
    for (const json& e : v) {
        if (!e.is_number_integer() || e.get<long long>() < 0)
            fail(where, "'seeds' entries must be non-negative integers");
        seeds.push_back(e.get<std::uint64_t>());
    }
    if (seeds.empty()) fail(where, "'seeds' must not be empty");
    return seeds;
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (std::filesystem::path(base_dir) / fp).string();
}

// All keys the `sweep` section accepts, in the expansion order.
constexpr const char* kSweepKeys[] = {
    "activation",       "algorithm",  "optimizer",          "step_size",
    "weight_decay",     "replacement_rate", "decay_rate",   "maturity_threshold",
    "utility",          "flip_period", "period",            "hidden",
};

void apply_param(ExperimentConfig& cfg, const std::string& key, const json& v,
                 const std::string& where) {
    auto num = [&] {
        if (!v.is_number()) fail(where, "sweep '" + key + "' values must be numbers");
        return v.get<double>();
    };
    auto integer = [&] {
        if (!v.is_number_integer()) fail(where, "sweep '" + key + "' values must be integers");
        return v.get<long>();
    };
    auto str = [&] {
        if (!v.is_string()) fail(where, "sweep '" + key + "' values must be strings");
        return v.get<std::string>();
    };
    if (key == "activation")
        cfg.activation = act_from_name(str());
    else if (key == "algorithm")
        cfg.algorithm = algorithm_from_name(str());
    else if (key == "optimizer")
        cfg.optimizer = optimizer_from_name(str());
    else if (key == "step_size")
        cfg.step_size = num();
    else if (key == "weight_decay")
        cfg.weight_decay = num();
    else if (key == "replacement_rate")
        cfg.gnt.replacement_rate = num();
    else if (key == "decay_rate")
        cfg.gnt.decay_rate = num();
    else if (key == "maturity_threshold")
        cfg.gnt.maturity_threshold = integer();
    else if (key == "utility")
        cfg.gnt.utility = utility_from_name(str());
    else if (key == "flip_period")
        cfg.bitflip.flip_period = integer();
    else if (key == "period")
        cfg.mnist.period = integer();
    else if (key == "hidden")
        cfg.hidden = parse_hidden(v, where);
    else
        fail(where, "unknown sweep key '" + key + "'");
}

std::string value_tag(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long>());
    if (v.is_number()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", v.get<double>());
        return buf;
    }
    if (v.is_array()) {
        std::string s;
        for (const json& e : v) {
            if (!s.empty()) s += 'x';
            s += value_tag(e);
        }
        return s;
    }
    return v.dump();
}

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["problem"] = problem_name(c.problem);
    j["bitflip"] = {{"m", c.bitflip.m},
                    {"f", c.bitflip.f},
                    {"flip_period", c.bitflip.flip_period},
                    {"beta", c.bitflip.beta},
                    {"target_width", c.bitflip.target_width}};
    j["mnist"] = {{"period", c.mnist.period}, {"images", c.mnist_images}, {"labels", c.mnist_labels}};
    j["hidden"] = c.hidden;
    j["activation"] = act_name(c.activation);
    j["algorithm"] = algorithm_name(c.algorithm);
    j["optimizer"] = optimizer_name(c.optimizer);
    j["step_size"] = c.step_size;
    j["weight_decay"] = c.weight_decay;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
    j["gnt"] = {{"replacement_rate", c.gnt.replacement_rate},
                {"decay_rate", c.gnt.decay_rate},
                {"maturity_threshold", c.gnt.maturity_threshold},
                {"utility", utility_name(c.gnt.utility)}};
    j["steps"] = c.steps;
    j["bin_size"] = c.bin_size;
    j["seeds"] = c.seeds;
    j["metrics"] = {{"weight_mag", c.record_weight_mag},
                    {"saturation", c.record_saturation},
                    {"input_grad", c.record_input_grad},
                    {"saturation_threshold", c.saturation_threshold}};
    return j;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

Act act_from_name(const std::string& name) {
    if (name == "tanh") return Act::Tanh;
    if (name == "sigmoid") return Act::Sigmoid;
    if (name == "relu") return Act::Relu;
    if (name == "leaky_relu") return Act::LeakyRelu;
    if (name == "elu") return Act::Elu;
    if (name == "swish") return Act::Swish;
    if (name == "linear") return Act::Linear;
    throw ConfigError("unknown activation '" + name +
                      "' (tanh, sigmoid, relu, leaky_relu, elu, swish, linear)");
}

Algorithm algorithm_from_name(const std::string& name) {
    if (name == "bp") return Algorithm::Bp;
    if (name == "bp_l2") return Algorithm::BpL2;
    if (name == "cbp") return Algorithm::Cbp;
    throw ConfigError("unknown algorithm '" + name + "' (bp, bp_l2, cbp)");
}

OptKind optimizer_from_name(const std::string& name) {
    if (name == "sgd") return OptKind::Sgd;
    if (name == "adam") return OptKind::Adam;
    throw ConfigError("unknown optimizer '" + name + "' (sgd, adam)");
}

UtilityKind utility_from_name(const std::string& name) {
    if (name == "random") return UtilityKind::Random;
    if (name == "weight_magnitude") return UtilityKind::WeightMagnitude;
    if (name == "contribution") return UtilityKind::Contribution;
    if (name == "mean_corrected_contribution") return UtilityKind::MeanCorrectedContribution;
    if (name == "adaptation") return UtilityKind::Adaptation;
    if (name == "overall") return UtilityKind::Overall;
    throw ConfigError("unknown utility '" + name +
                      "' (random, weight_magnitude, contribution, "
                      "mean_corrected_contribution, adaptation, overall)");
}

ParsedExperiment parse_config_text(const std::string& text, const std::string& source_name,
                                   const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    if (!j.is_object()) fail(source_name, "top level must be an object");
    check_keys(j, source_name,
               {"problem", "bitflip", "mnist", "hidden", "activation", "algorithm", "optimizer",
                "step_size", "weight_decay", "beta1", "beta2", "eps", "gnt", "steps", "bin_size",
                "seeds", "metrics", "name", "out", "jobs", "sweep"});

    ExperimentConfig cfg;
    const std::string problem = get_str(j, "problem", "bitflip", source_name);
    if (problem == "bitflip")
        cfg.problem = Problem::BitFlip;
    else if (problem == "permuted_mnist")
        cfg.problem = Problem::PermutedMnist;
    else
        fail(source_name, "unknown problem '" + problem + "' (bitflip, permuted_mnist)");

    if (j.contains("bitflip")) {
        const json& b = j.at("bitflip");
        if (!b.is_object()) fail(source_name, "'bitflip' must be an object");
        const std::string where = source_name + ".bitflip";
        check_keys(b, where, {"m", "f", "flip_period", "beta", "target_width"});
        cfg.bitflip.m = static_cast<int>(get_int(b, "m", cfg.bitflip.m, where));
        cfg.bitflip.f = static_cast<int>(get_int(b, "f", cfg.bitflip.f, where));
        cfg.bitflip.flip_period = get_int(b, "flip_period", cfg.bitflip.flip_period, where);
        cfg.bitflip.beta = get_num(b, "beta", cfg.bitflip.beta, where);
        cfg.bitflip.target_width =
            static_cast<int>(get_int(b, "target_width", cfg.bitflip.target_width, where));
    }

    if (j.contains("mnist")) {
        const json& m = j.at("mnist");
        if (!m.is_object()) fail(source_name, "'mnist' must be an object");
        const std::string where = source_name + ".mnist";
        check_keys(m, where, {"period", "images", "labels"});
        cfg.mnist.period = get_int(m, "period", cfg.mnist.period, where);
        cfg.mnist_images = get_str(m, "images", "", where);
        cfg.mnist_labels = get_str(m, "labels", "", where);
    }

    if (j.contains("hidden")) cfg.hidden = parse_hidden(j.at("hidden"), source_name);
    cfg.activation = act_from_name(get_str(j, "activation", "tanh", source_name));
    cfg.algorithm = algorithm_from_name(get_str(j, "algorithm", "bp", source_name));
    cfg.optimizer = optimizer_from_name(get_str(j, "optimizer", "sgd", source_name));
    cfg.step_size = get_num(j, "step_size", cfg.step_size, source_name);
    cfg.weight_decay = get_num(j, "weight_decay", cfg.weight_decay, source_name);
    cfg.beta1 = get_num(j, "beta1", cfg.beta1, source_name);
    cfg.beta2 = get_num(j, "beta2", cfg.beta2, source_name);
    cfg.eps = get_num(j, "eps", cfg.eps, source_name);

    if (j.contains("gnt")) {
        const json& g = j.at("gnt");
        if (!g.is_object()) fail(source_name, "'gnt' must be an object");
        const std::string where = source_name + ".gnt";
        check_keys(g, where, {"replacement_rate", "decay_rate", "maturity_threshold", "utility"});
        cfg.gnt.replacement_rate =
            get_num(g, "replacement_rate", cfg.gnt.replacement_rate, where);
        cfg.gnt.decay_rate = get_num(g, "decay_rate", cfg.gnt.decay_rate, where);
        cfg.gnt.maturity_threshold =
            get_int(g, "maturity_threshold", cfg.gnt.maturity_threshold, where);
        cfg.gnt.utility = utility_from_name(get_str(g, "utility", "overall", where));
    }

    // Problem-specific reporting defaults; explicit keys win.
    if (cfg.problem == Problem::BitFlip) {
        cfg.steps = 1000000;
        cfg.bin_size = 20000;
    } else {
        cfg.steps = 30L * 60000L;
        cfg.bin_size = 60000;
    }
    cfg.steps = get_int(j, "steps", cfg.steps, source_name);
    cfg.bin_size = get_int(j, "bin_size", cfg.bin_size, source_name);
    if (j.contains("seeds")) cfg.seeds = parse_seeds(j.at("seeds"), source_name);

    if (j.contains("metrics")) {
        const json& m = j.at("metrics");
        if (!m.is_object()) fail(source_name, "'metrics' must be an object");
        const std::string where = source_name + ".metrics";
        check_keys(m, where, {"weight_mag", "saturation", "input_grad", "saturation_threshold"});
        cfg.record_weight_mag = get_bool(m, "weight_mag", cfg.record_weight_mag, where);
        cfg.record_saturation = get_bool(m, "saturation", cfg.record_saturation, where);
        cfg.record_input_grad = get_bool(m, "input_grad", cfg.record_input_grad, where);
        cfg.saturation_threshold =
            get_num(m, "saturation_threshold", cfg.saturation_threshold, where);
    }

    if (cfg.problem == Problem::PermutedMnist) {
        std::string images = cfg.mnist_images, labels = cfg.mnist_labels;
        if (images.empty() != labels.empty())
            fail(source_name, "'mnist' needs both images and labels, or neither");
        if (images.empty()) {
            const char* dir = std::getenv("CBPLAB_MNIST_DIR");
            if (dir == nullptr || *dir == '\0')
                fail(source_name,
                     "permuted_mnist needs mnist.images/mnist.labels or $CBPLAB_MNIST_DIR");
            images = std::string(dir) + "/train-images-idx3-ubyte";
            labels = std::string(dir) + "/train-labels-idx1-ubyte";
        } else {
            images = resolve_path(images, base_dir);
            labels = resolve_path(labels, base_dir);
        }
        cfg.mnist_images = images;
        cfg.mnist_labels = labels;
        cfg.mnist_data = std::make_shared<const MnistData>(mnist_load(images, labels));
    }

    ParsedExperiment parsed;
    parsed.out_dir = get_str(j, "out", parsed.out_dir, source_name);
    parsed.jobs = static_cast<int>(get_int(j, "jobs", parsed.jobs, source_name));
    if (parsed.jobs < 1) fail(source_name, "'jobs' must be >= 1");
    const std::string name = get_str(j, "name", "run", source_name);

    if (!j.contains("sweep")) {
        parsed.configs.push_back({name, cfg});
    } else {
        const json& sw = j.at("sweep");
        if (!sw.is_object()) fail(source_name, "'sweep' must be an object");
        const std::string where = source_name + ".sweep";
        for (const auto& [key, value] : sw.items()) {
            (void)value;
            bool known = false;
            for (const char* k : kSweepKeys)
                if (key == k) {
                    known = true;
                    break;
                }
            if (!known) fail(where, "unknown key '" + key + "'");
        }
        std::vector<std::pair<std::string, const json*>> dims;
        for (const char* key : kSweepKeys) {
            if (!sw.contains(key)) continue;
            const json& values = sw.at(key);
            if (!values.is_array() || values.empty())
                fail(where, std::string("'") + key + "' must be a non-empty array");
            dims.emplace_back(key, &values);
        }
        if (dims.empty()) fail(where, "sweep section is empty");

        std::vector<std::size_t> at(dims.size(), 0);
        bool done = false;
        while (!done) {
            ExperimentConfig c = cfg;
            std::string id = name;
            for (std::size_t d = 0; d < dims.size(); ++d) {
                const json& v = (*dims[d].second)[at[d]];
                apply_param(c, dims[d].first, v, where);
                id += "_" + dims[d].first + "=" + value_tag(v);
            }
            parsed.configs.push_back({id, std::move(c)});
            done = true;
            for (std::size_t d = dims.size(); d-- > 0;) {
                if (++at[d] < dims[d].second->size()) {
                    done = false;
                    break;
                }
                at[d] = 0;
            }
        }
    }

    for (const auto& nc : parsed.configs) validate_config(nc.cfg);
    return parsed;
}

ParsedExperiment load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path, std::filesystem::path(path).parent_path().string());
}

void write_manifest(const std::string& path, std::span<const NamedConfig> configs,
                    std::span<const SweepCell> cells) {
    json m;
    m["configs"] = json::object();
    for (const auto& nc : configs) m["configs"][nc.id] = config_to_json(nc.cfg);
    m["runs"] = json::array();
    for (const auto& c : cells) {
        json r;
        r["config_id"] = c.config_id;
        r["seed"] = c.seed;
        r["ok"] = c.ok;
        if (!c.ok) r["error"] = c.error;
        r["diverged"] = c.metrics.diverged;
        r["divergence_step"] = c.metrics.divergence_step;
        r["bins"] = c.metrics.bins.size();
        r["total_loss"] = c.metrics.total_loss;
        r["data_checksum"] = hex64(c.metrics.data_checksum);
        m["runs"].push_back(std::move(r));
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError(tmp + ": cannot open for writing");
        out << m.dump(2) << '\n';
        if (!out) throw DataError(tmp + ": write failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace cbp
