#include "cbp/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "cbp/errors.hpp"
#include "json.hpp"

namespace cbp {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double to_num(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError(where + ": bad number '" + s + "'");
    }
}

}  // namespace

std::vector<ReportRow> read_runs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");

    const std::vector<std::string> header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    std::vector<std::size_t> sat_cols;
    for (std::size_t i = 0; i < header.size(); ++i) {
        col[header[i]] = i;
        if (header[i].rfind("sat_l", 0) == 0) sat_cols.push_back(i);
    }
    for (const char* need : {"config_id", "seed", "bin", "loss", "accuracy", "weight_mag",
                             "input_grad_mag"})
        if (!col.count(need)) throw DataError(path + ": missing column '" + std::string(need) + "'");

    std::vector<ReportRow> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != header.size())
            throw DataError(path + ":" + std::to_string(line_no) + ": wrong field count");
        const std::string where = path + ":" + std::to_string(line_no);
        ReportRow r;
        r.config_id = f[col["config_id"]];
        r.seed = static_cast<std::uint64_t>(to_num(f[col["seed"]], where));
        r.bin = static_cast<long>(to_num(f[col["bin"]], where));
        r.loss = to_num(f[col["loss"]], where);
        r.accuracy = to_num(f[col["accuracy"]], where);
        r.weight_mag = to_num(f[col["weight_mag"]], where);
        r.input_grad_mag = to_num(f[col["input_grad_mag"]], where);
        for (std::size_t c : sat_cols) r.saturation.push_back(to_num(f[c], where));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ReportRow> rows_from_cells(std::span<const SweepCell> cells) {
    std::vector<ReportRow> rows;
    for (const auto& c : cells) {
        if (!c.ok) continue;
        for (std::size_t b = 0; b < c.metrics.bins.size(); ++b) {
            const BinMetrics& bm = c.metrics.bins[b];
            ReportRow r;
            r.config_id = c.config_id;
            r.seed = c.seed;
            r.bin = static_cast<long>(b);
            r.loss = bm.loss;
            r.accuracy = bm.accuracy;
            r.weight_mag = bm.weight_mag;
            r.input_grad_mag = bm.input_grad_mag;
            r.saturation = bm.saturation;
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

std::vector<ConfigSummary> summarize(const std::vector<ReportRow>& rows) {
    // config -> seed -> per-bin (loss, accuracy) in bin order
    std::map<std::string, std::map<std::uint64_t, std::vector<std::pair<double, double>>>> by;
    for (const ReportRow& r : rows) {
        auto& run = by[r.config_id][r.seed];
        if (static_cast<std::size_t>(r.bin) >= run.size())
            run.resize(static_cast<std::size_t>(r.bin) + 1);
        run[static_cast<std::size_t>(r.bin)] = {r.loss, r.accuracy};
    }

    std::vector<ConfigSummary> out;
    for (const auto& [id, runs] : by) {
        std::size_t n_bins = std::numeric_limits<std::size_t>::max();
        for (const auto& [seed, run] : runs) n_bins = std::min(n_bins, run.size());
        ConfigSummary s;
        s.config_id = id;
        s.n_runs = runs.size();
        s.n_bins = n_bins;
        if (n_bins == 0) {
            out.push_back(s);
            continue;
        }
        std::vector<double> loss(n_bins, 0.0), acc(n_bins, 0.0);
        for (const auto& [seed, run] : runs)
            for (std::size_t b = 0; b < n_bins; ++b) {
                loss[b] += run[b].first;
                acc[b] += run[b].second;
            }
        for (std::size_t b = 0; b < n_bins; ++b) {
            loss[b] /= double(runs.size());
            acc[b] /= double(runs.size());
        }
        s.final_loss = loss.back();
        s.min_loss = *std::min_element(loss.begin(), loss.end());
        s.degradation_ratio = s.min_loss == 0.0
                                  ? (s.final_loss == 0.0 ? 1.0
                                                         : std::numeric_limits<double>::infinity())
                                  : s.final_loss / s.min_loss;
        s.final_accuracy = acc.back();
        s.best_accuracy = *std::max_element(acc.begin(), acc.end());
        out.push_back(std::move(s));
    }
    return out;
}

Report build_report(const std::string& dir) {
    const std::string csv_path = dir + "/runs.csv";
    if (!std::filesystem::exists(csv_path)) throw DataError("no runs found in " + dir);
    std::vector<ReportRow> rows = read_runs_csv(csv_path);
    if (rows.empty()) throw DataError("no runs found in " + dir);

    Report rep;
    rep.configs = summarize(rows);

    const std::string manifest_path = dir + "/manifest.json";
    if (!std::filesystem::exists(manifest_path)) return rep;

    nlohmann::json manifest;
    {
        std::ifstream in(manifest_path);
        try {
            in >> manifest;
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError(manifest_path + ": " + e.what());
        }
    }
    if (!manifest.contains("configs")) return rep;
    const nlohmann::json& configs = manifest.at("configs");

    // total loss per (config, seed) = bin_size * sum of bin losses
    std::map<std::string, std::map<std::uint64_t, double>> totals;
    for (const ReportRow& r : rows) totals[r.config_id][r.seed] += r.loss;

    struct ParamPath {
        const char* name;
        const char* outer;
        const char* inner;
    };
    const ParamPath params[] = {
        {"step_size", "step_size", nullptr},
        {"weight_decay", "weight_decay", nullptr},
        {"replacement_rate", "gnt", "replacement_rate"},
    };
    for (const ParamPath& p : params) {
        SensitivityTable table;
        table.param = p.name;
        bool all_found = true;
        for (const auto& [id, seeds] : totals) {
            if (!configs.contains(id)) {
                all_found = false;
                break;
            }
            const nlohmann::json& c = configs.at(id);
            const nlohmann::json* v = nullptr;
            if (p.inner == nullptr) {
                if (c.contains(p.outer)) v = &c.at(p.outer);
            } else if (c.contains(p.outer) && c.at(p.outer).contains(p.inner)) {
                v = &c.at(p.outer).at(p.inner);
            }
            if (v == nullptr || !v->is_number() || !c.contains("bin_size")) {
                all_found = false;
                break;
            }
            const double bin_size = c.at("bin_size").get<double>();
            SensitivityRow row;
            row.config_id = id;
            row.value = v->get<double>();
            row.n_runs = seeds.size();
            double sum = 0.0;
            for (const auto& [seed, total] : seeds) sum += total * bin_size;
            row.mean_total_loss = sum / double(seeds.size());
            if (seeds.size() > 1) {
                double var = 0.0;
                for (const auto& [seed, total] : seeds) {
                    const double d = total * bin_size - row.mean_total_loss;
                    var += d * d;
                }
                var /= double(seeds.size() - 1);
                row.se = std::sqrt(var / double(seeds.size()));
            }
            table.rows.push_back(std::move(row));
        }
        if (!all_found || table.rows.size() < 2) continue;
        bool varies = false;
        for (const SensitivityRow& r : table.rows)
            if (r.value != table.rows.front().value) varies = true;
        if (!varies) continue;
        std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) {
            return a.value != b.value ? a.value < b.value : a.config_id < b.config_id;
        });
        rep.sensitivities.push_back(std::move(table));
    }
    return rep;
}

void write_long_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError(tmp + ": cannot open for writing");
        out << "config_id,seed,bin,metric,value\n";
        char buf[32];
        auto emit = [&](const ReportRow& r, const std::string& metric, double v) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << r.config_id << ',' << r.seed << ',' << r.bin << ',' << metric << ',' << buf
                << '\n';
        };
        for (const ReportRow& r : rows) {
            emit(r, "loss", r.loss);
            emit(r, "accuracy", r.accuracy);
            emit(r, "weight_mag", r.weight_mag);
            emit(r, "input_grad_mag", r.input_grad_mag);
            for (std::size_t l = 0; l < r.saturation.size(); ++l)
                emit(r, "sat_l" + std::to_string(l + 1), r.saturation[l]);
        }
        if (!out) throw DataError(tmp + ": write failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace cbp
