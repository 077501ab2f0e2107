#pragma once

#include <span>
#include <string>
#include <vector>

#include "cbp/harness.hpp"

namespace cbp {

// A parsed experiment file: one config, or the expansion of its `sweep`
// section into one config per combination.
struct ParsedExperiment {
    std::vector<NamedConfig> configs;
    std::string out_dir = "results";
    int jobs = 1;
};

/// Parses a JSON experiment config. Unknown keys anywhere are errors; every
/// field has a documented default; a `sweep` object of key -> value-list pairs
/// expands into the Cartesian product, with each combination's values baked
/// into the config id. Relative MNIST paths resolve against `base_dir`, and
/// when no paths are given the directory in $CBPLAB_MNIST_DIR is tried.
ParsedExperiment parse_config_text(const std::string& text, const std::string& source_name,
                                   const std::string& base_dir = ".");

/// parse_config_text over a file's contents; a missing file is a ConfigError
/// naming the path.
ParsedExperiment load_config_file(const std::string& path);

/// Sidecar for write_runs_csv: full hyperparameter echo (defaults included)
/// per config id plus the status, checksum and total loss of every run.
/// Written to a temp file, then renamed.
void write_manifest(const std::string& path, std::span<const NamedConfig> configs,
                    std::span<const SweepCell> cells);

Act act_from_name(const std::string& name);
Algorithm algorithm_from_name(const std::string& name);
OptKind optimizer_from_name(const std::string& name);
UtilityKind utility_from_name(const std::string& name);

}  // namespace cbp
