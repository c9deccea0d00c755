#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <string>

#include "erdmd/experiment.hpp"

namespace {

void emit_error_json(const std::string &code, const std::string &message)
{
    erdmd::json j;
    j["error"]["code"] = code;
    j["error"]["message"] = message;
    std::fprintf(stderr, "%s\n", j.dump().c_str());
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"erdmd: fit, analyze, and report lagged DMD models selected by "
                 "conditional-information gain"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::optional<uint64_t> seed;
    std::optional<std::string> format;
    bool baseline = false;

    auto add_common = [&](CLI::App *sub, bool needs_config) {
        CLI::Option *c = sub->add_option("--config", config_path, "experiment config JSON file");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "run output directory");
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_flag("--baseline", baseline, "include the all-lags baseline model");
        sub->add_option("--format", format, "series/error output format")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    CLI::App *sim = app.add_subcommand("simulate", "generate system data into the run directory");
    CLI::App *fit = app.add_subcommand("fit", "run the lag-selection loop on the simulated data");
    CLI::App *rec = app.add_subcommand("reconstruct", "closed-loop reconstruction + forecast errors");
    CLI::App *spec = app.add_subcommand("spectrum", "companion and reduced-polynomial eigenvalues");
    CLI::App *rep = app.add_subcommand("report", "aggregate a run directory into summary.json");
    for (CLI::App *sub : {sim, fit, rec, spec}) add_common(sub, true);
    add_common(rep, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        emit_error_json("usage", e.what());
        return 2;
    }

    try {
        if (rep->parsed() && config_path.empty()) {
            erdmd::cmd_report(out_dir);
            return 0;
        }
        erdmd::ExperimentConfig cfg = erdmd::load_config(config_path);
        if (seed) {
            cfg.seed = *seed;
            cfg.er.seed = *seed;
        }
        if (baseline) cfg.baseline = true;
        if (format) cfg.format = *format;

        if (sim->parsed()) erdmd::cmd_simulate(cfg, out_dir);
        else if (fit->parsed()) erdmd::cmd_fit(cfg, out_dir);
        else if (rec->parsed()) erdmd::cmd_reconstruct(cfg, out_dir);
        else if (spec->parsed()) erdmd::cmd_spectrum(cfg, out_dir);
        else erdmd::cmd_report(out_dir);
        return 0;
    } catch (const erdmd::error &e) {
        emit_error_json(e.code(), e.what());
        return 1;
    } catch (const std::exception &e) {
        emit_error_json("internal", e.what());
        return 1;
    }
}
