#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "corrsynth/bench.hpp"

namespace {

int report_failure(const std::exception& e) {
    std::cout << corrsynth::error_document(corrsynth::issues_from(e)).dump(2) << '\n';
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"corrsynth: optimal stimulus and reference synthesis test bench"};
    app.require_subcommand(1);

    std::string run_config;
    std::string out_dir;
    std::uint64_t seed = 0;
    int trials = 0;
    auto* run = app.add_subcommand("run", "execute the configured experiment");
    run->add_option("config", run_config, "experiment TOML file")->required();
    auto* out_opt = run->add_option("--out", out_dir, "output directory");
    auto* seed_opt = run->add_option("--seed", seed, "master seed override");
    auto* trials_opt = run->add_option("--trials", trials, "Monte-Carlo trial count override")->check(CLI::PositiveNumber);

    std::string selftest_config;
    auto* selftest = app.add_subcommand("selftest", "calibrator suite over the bundled weightings");
    selftest->add_option("config", selftest_config, "optional TOML with [measurement] overrides");

    std::string synth_config;
    std::string emit;
    auto* synth = app.add_subcommand("synth", "emit the synthesized schedule only");
    synth->add_option("config", synth_config, "experiment TOML file")->required();
    synth->add_option("--emit", emit, "output file: *.json for the schedule, *.csv for the sampled waveform")->required();

    std::string compare_config;
    std::string compare_out;
    auto* compare = app.add_subcommand("compare", "lock-in versus optimal comparison");
    compare->add_option("config", compare_config, "experiment TOML file")->required();
    auto* compare_out_opt = compare->add_option("--out", compare_out, "output directory");
    auto* compare_seed = compare->add_option("--seed", seed, "master seed override");
    auto* compare_trials = compare->add_option("--trials", trials, "trial count override")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            corrsynth::RunOptions opt;
            if (*out_opt) opt.out_dir = out_dir;
            if (*seed_opt) opt.seed = seed;
            if (*trials_opt) opt.trials = trials;
            const auto outcome = corrsynth::run_experiment(corrsynth::load_config(run_config), opt);
            for (const auto& f : outcome.files) std::cout << f.string() << '\n';
            return 0;
        }
        if (*selftest) {
            std::optional<std::filesystem::path> path;
            if (!selftest_config.empty()) path = selftest_config;
            const auto checks = corrsynth::run_selftest(corrsynth::selftest_measurement(path));
            bool ok = true;
            for (const auto& c : checks) {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  (" << c.detail << ")\n";
                ok = ok && c.passed;
            }
            std::cout << (ok ? "selftest: all checks passed\n" : "selftest: FAILED\n");
            return ok ? 0 : 1;
        }
        if (*synth) {
            const bool csv = std::filesystem::path(emit).extension() == ".csv";
            const auto text = corrsynth::emit_schedule(corrsynth::load_config(synth_config), csv);
            std::ofstream out(emit, std::ios::binary | std::ios::trunc);
            if (!out) throw corrsynth::Error("cannot write " + emit);
            out << text;
            std::cout << emit << '\n';
            return 0;
        }
        if (*compare) {
            corrsynth::RunOptions opt;
            if (*compare_out_opt) opt.out_dir = compare_out;
            if (*compare_seed) opt.seed = seed;
            if (*compare_trials) opt.trials = trials;
            const auto outcome = corrsynth::run_compare(corrsynth::load_config(compare_config), opt);
            for (const auto& r : outcome.summary["results"])
                std::cout << r["target"].get<std::string>() << ": ratio " << r["ratio"].get<double>() << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        return report_failure(e);
    }
    return 0;
}
