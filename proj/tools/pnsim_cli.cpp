// pnsim: command-line runner for calibration, the physical experiments, the CTRNN
// reference, physical-vs-reference comparison and parameter sweeps.

#include "pnsim/compare.hpp"
#include "pnsim/errors.hpp"
#include "pnsim/sweep.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace pnsim;
using namespace pnsim::harness;

namespace {

enum Exit { Ok = 0, Failure = 1, BadConfig = 2, NoConvergence = 3, CalibrationFailed = 4 };

struct Common {
    std::string config;
    std::string out = "out";
    std::optional<double> dt;
    unsigned workers = 1;
    std::uint64_t seed = 0;  // only randomized test inputs use it; physics never does
};

void add_common(CLI::App* app, Common& c, bool config_required) {
    auto* opt = app->add_option("--config", c.config, "JSON configuration file");
    if (config_required) opt->required();
    opt->check(CLI::ExistingFile);
    app->add_option("--out", c.out, "output directory")->capture_default_str();
    app->add_option("--dt", c.dt, "time step override, seconds")->check(CLI::PositiveNumber);
    app->add_option("--workers", c.workers, "concurrent sweep points")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--seed", c.seed, "seed for randomized test inputs");
}

// Loads the file (or an empty configuration), forces the experiment and applies --dt.
ExperimentConfig load(const Common& c, const std::string& experiment) {
    json raw = json::object();
    std::string base = ".";
    if (!c.config.empty()) {
        try {
            raw = json::parse(read_file(c.config));
        } catch (const json::exception& e) {
            throw ConfigError("cannot parse '" + c.config + "': " + e.what());
        }
        if (!raw.is_object()) throw ConfigError("configuration must be a JSON object");
        const auto dir = fs::path(c.config).parent_path();
        if (!dir.empty()) base = dir.string();
    }
    if (!experiment.empty()) raw["experiment"] = experiment;
    if (c.dt) {
        if (raw.value("experiment", std::string{}) == "ctrnn-ref") raw["ctrnn"]["dt"] = *c.dt;
        else raw["solver"]["dt"] = *c.dt;
    }
    return parse_config(raw, base);
}

void report_warnings(const RunOutput& out) {
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_calibrate(const Common& c) {
    const auto cfg = load(c, "calibrate");
    const auto run = run_calibration(cfg.setup);
    json resolved = {{"experiment", "calibrate"}, {"bank", cfg.setup.bank}, {"neuron", cfg.setup.neuron},
                     {"calibration", cfg.setup.calibration}};
    write_calibration(c.out, run, resolved);
    std::cout << "calibrated " << run.map.channels.size() << " channels in " << run.metrics.value("runtime_s", 0.0)
              << " s -> " << c.out << "\n";
    return Ok;
}

int cmd_run(const Common& c, const std::string& experiment) {
    const auto cfg = load(c, experiment);
    const auto out = run_any(cfg);
    report_warnings(out);
    write_outputs(c.out, out);
    std::cout << cfg.experiment << " -> " << c.out << "\n";
    return Ok;
}

int cmd_compare(const Common& c, std::string experiment) {
    auto cfg = load(c, "");
    if (experiment.empty()) {
        experiment = cfg.experiment == "compare" ? cfg.section("compare").value("experiment", std::string{}) : cfg.experiment;
    }
    if (experiment.empty()) throw ConfigError("compare needs an experiment (fanin, cascade, hopf or wta)");
    json raw = cfg.raw;
    raw["experiment"] = experiment;
    cfg = parse_config(raw, cfg.base_dir);

    const Hardware hw(cfg.setup, cfg.base_dir);
    const auto physical = run_experiment(cfg, &hw);
    report_warnings(physical);
    write_outputs((fs::path(c.out) / "physical").string(), physical);

    const auto cmp = compare(cfg, hw, physical);
    RunOutput ref;
    ref.trace = cmp.reference;
    ref.metrics = cmp.report;
    ref.resolved = physical.resolved;
    ref.resolved["reference_network"] = cmp.params;
    write_outputs(c.out, ref);
    std::cout << "compare " << experiment << " -> " << c.out << "\n";
    return Ok;
}

int cmd_sweep(const Common& c) {
    const auto cfg = load(c, "");
    SweepOptions opts;
    opts.workers = c.workers;
    const auto res = run_sweep(cfg, opts);
    write_sweep(c.out, res);
    for (const auto& p : res.points) {
        if (!p.ok) std::cerr << "point " << p.index << " failed (" << p.error_kind << "): " << p.error << "\n";
    }
    std::cout << "sweep " << res.experiment << ": " << res.points.size() << " points, " << res.failures() << " failed -> "
              << c.out << "\n";
    return Ok;
}

int exit_for(const std::exception& e) {
    const auto kind = error_kind(e);
    if (kind == "config") return BadConfig;
    if (kind == "convergence") return NoConvergence;
    if (kind == "calibration") return CalibrationFailed;
    return Failure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Electro-optic co-simulator of silicon photonic neurons"};
    app.require_subcommand(1);

    Common common;
    std::string experiment, compare_experiment;

    auto* calibrate = app.add_subcommand("calibrate", "characterize the weight bank and write its weight map");
    add_common(calibrate, common, false);

    auto* run = app.add_subcommand("run", "run one experiment");
    run->add_option("experiment", experiment, "fanin, cascade, hopf, wta or transient")
        ->required()
        ->check(CLI::IsMember({"fanin", "cascade", "hopf", "wta", "transient"}));
    add_common(run, common, false);

    auto* ref = app.add_subcommand("ctrnn-ref", "integrate and analyse the abstract CTRNN");
    add_common(ref, common, true);

    auto* cmp = app.add_subcommand("compare", "physical run against its fitted CTRNN equivalent");
    cmp->add_option("experiment", compare_experiment, "fanin, cascade, hopf or wta (defaults to the config's)")
        ->check(CLI::IsMember({"fanin", "cascade", "hopf", "wta"}));
    add_common(cmp, common, false);

    auto* sweep = app.add_subcommand("sweep", "cartesian parameter sweep over the config's sweep axes");
    add_common(sweep, common, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? Ok : BadConfig;
    }

    try {
        if (*calibrate) return cmd_calibrate(common);
        if (*run) return cmd_run(common, experiment);
        if (*ref) return cmd_run(common, "ctrnn-ref");
        if (*cmp) return cmd_compare(common, compare_experiment);
        if (*sweep) return cmd_sweep(common);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_for(e);
    }
    return Failure;
}
