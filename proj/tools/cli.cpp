#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cbp/config.hpp"
#include "cbp/errors.hpp"
#include "cbp/harness.hpp"
#include "cbp/report.hpp"

namespace cbp {

namespace {

struct RunFlags {
    std::string config_path;
    long seed = 0;
    long steps = 0;
    long bin = 0;
    std::string out;
    int jobs = 0;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* steps_opt = nullptr;
    CLI::Option* bin_opt = nullptr;
    CLI::Option* out_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config,-c", f.config_path, "experiment config file (json)")->required();
    f.seed_opt = cmd->add_option("--seed", f.seed, "replace the config's seed list with one seed");
    f.steps_opt = cmd->add_option("--steps", f.steps, "override the step count");
    f.bin_opt = cmd->add_option("--bin", f.bin, "override the bin size");
    f.out_opt = cmd->add_option("--out", f.out, "output directory (default from config)");
    f.jobs_opt = cmd->add_option("--jobs", f.jobs, "worker threads (default from config)");
}

void print_summaries(const std::vector<ConfigSummary>& sums) {
    for (const ConfigSummary& s : sums) {
        std::printf("%s: %zu run(s), %zu bin(s)\n", s.config_id.c_str(), s.n_runs, s.n_bins);
        if (s.n_bins == 0) continue;
        std::printf("  loss      final %-12.6g best %-12.6g final/best %.4g\n", s.final_loss,
                    s.min_loss, s.degradation_ratio);
        if (s.best_accuracy > 0.0)
            std::printf("  accuracy  final %-12.4f best %-12.4f\n", s.final_accuracy,
                        s.best_accuracy);
    }
}

int do_run(const RunFlags& f) {
    ParsedExperiment exp;
    try {
        exp = load_config_file(f.config_path);
        if (f.seed_opt->count()) {
            if (f.seed < 0) throw ConfigError("--seed must be non-negative");
            for (auto& nc : exp.configs) nc.cfg.seeds = {static_cast<std::uint64_t>(f.seed)};
        }
        if (f.steps_opt->count())
            for (auto& nc : exp.configs) nc.cfg.steps = f.steps;
        if (f.bin_opt->count())
            for (auto& nc : exp.configs) nc.cfg.bin_size = f.bin;
        if (f.out_opt->count()) exp.out_dir = f.out;
        if (f.jobs_opt->count()) exp.jobs = f.jobs;
        if (exp.jobs < 1) throw ConfigError("--jobs must be >= 1");
        for (const auto& nc : exp.configs) validate_config(nc.cfg);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    try {
        std::filesystem::create_directories(exp.out_dir);
        const std::vector<SweepCell> cells = sweep(exp.configs, exp.jobs);
        write_runs_csv(exp.out_dir + "/runs.csv", cells);
        write_manifest(exp.out_dir + "/manifest.json", exp.configs, cells);

        print_summaries(summarize(rows_from_cells(cells)));

        int failures = 0;
        for (const SweepCell& c : cells) {
            if (!c.ok) {
                std::cerr << c.config_id << " seed " << c.seed << " failed: " << c.error << '\n';
                ++failures;
            } else if (c.metrics.diverged) {
                std::cerr << c.config_id << " seed " << c.seed << " diverged at step "
                          << c.metrics.divergence_step << '\n';
            }
        }
        std::printf("wrote %s/runs.csv and %s/manifest.json\n", exp.out_dir.c_str(),
                    exp.out_dir.c_str());
        return failures > 0 ? 1 : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

int do_report(const std::string& dir) {
    try {
        const Report rep = build_report(dir);
        print_summaries(rep.configs);
        for (const SensitivityTable& t : rep.sensitivities) {
            std::printf("total loss vs %s:\n", t.param.c_str());
            for (const SensitivityRow& r : t.rows)
                std::printf("  %-12g %-14.6g +- %-12.6g (%zu run(s), %s)\n", r.value,
                            r.mean_total_loss, r.se, r.n_runs, r.config_id.c_str());
        }
        write_long_csv(dir + "/long.csv", read_runs_csv(dir + "/runs.csv"));
        std::printf("wrote %s/long.csv\n", dir.c_str());
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"continual backprop experiment lab"};
    app.require_subcommand(1);

    RunFlags run_flags, sweep_flags;
    CLI::App* run_cmd = app.add_subcommand("run", "execute a config's runs");
    add_run_flags(run_cmd, run_flags);
    CLI::App* sweep_cmd =
        app.add_subcommand("sweep", "same as run; reads the config's sweep section");
    add_run_flags(sweep_cmd, sweep_flags);

    std::string report_dir;
    CLI::App* report_cmd = app.add_subcommand("report", "summarize a results directory");
    report_cmd->add_option("dir", report_dir, "directory with runs.csv + manifest.json")
        ->required();

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (app.got_subcommand(run_cmd)) return do_run(run_flags);
    if (app.got_subcommand(sweep_cmd)) return do_run(sweep_flags);
    return do_report(report_dir);
}

}  // namespace cbp
