#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cbp/harness.hpp"

namespace cbp {

// One CSV row as written by write_runs_csv.
struct ReportRow {
    std::string config_id;
    std::uint64_t seed = 0;
    long bin = 0;
    double loss = 0.0;
    double accuracy = 0.0;
    double weight_mag = 0.0;
    double input_grad_mag = 0.0;
    std::vector<double> saturation;
};

std::vector<ReportRow> read_runs_csv(const std::string& path);

/// The rows write_runs_csv would emit, without the file round trip.
std::vector<ReportRow> rows_from_cells(std::span<const SweepCell> cells);

struct ConfigSummary {
    std::string config_id;
    std::size_t n_runs = 0;
    std::size_t n_bins = 0;  // length of the common (min over seeds) curve
    double final_loss = 0.0;
    double min_loss = 0.0;
    double degradation_ratio = 0.0;  // final / min of the seed-mean loss curve
    double final_accuracy = 0.0;
    double best_accuracy = 0.0;
};

/// Per config: the seed-mean curve's final vs minimum loss and final vs best
/// accuracy. Sorted by config id.
std::vector<ConfigSummary> summarize(const std::vector<ReportRow>& rows);

struct SensitivityRow {
    std::string config_id;
    double value = 0.0;            // hyperparameter value for this config
    double mean_total_loss = 0.0;  // over seeds; total = bin_size * sum of bin losses
    double se = 0.0;
    std::size_t n_runs = 0;
};

struct SensitivityTable {
    std::string param;
    std::vector<SensitivityRow> rows;  // sorted by value, then id
};

struct Report {
    std::vector<ConfigSummary> configs;
    std::vector<SensitivityTable> sensitivities;
};

/// Reads `dir`/runs.csv plus `dir`/manifest.json and produces summaries and,
/// for every hyperparameter among step_size / weight_decay / replacement_rate
/// that varies across configs, a total-loss sensitivity table. Throws
/// DataError("no runs found ...") when the CSV is missing or has no rows.
Report build_report(const std::string& dir);

/// Plot-ready long format: config_id,seed,bin,metric,value.
void write_long_csv(const std::string& path, const std::vector<ReportRow>& rows);

}  // namespace cbp
