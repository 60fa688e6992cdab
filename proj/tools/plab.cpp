#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "plast/analytic.hpp"
#include "plast/experiment.hpp"

using namespace plast;

namespace {

int fail(const std::string& kind, const std::string& message) {
    std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump()
              << "\n";
    return 1;
}

// `spec` is either a JSON file holding one activation spec or a bare kind
// name, resolved against the documented canonical parameterizations.
ActivationSpec resolve_spec(const std::string& spec) {
    if (std::filesystem::exists(spec)) {
        std::ifstream in(spec);
        nlohmann::json j;
        in >> j;
        return j.get<ActivationSpec>();
    }
    auto specs = canonical_specs();
    auto extra = appendix_specs();
    specs.insert(specs.end(), extra.begin(), extra.end());
    for (const auto& s : specs)
        if (act_kind_name(s.kind) == spec) return s;
    ActivationSpec s;
    s.kind = act_kind_from_name(spec);
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plasticity lab: activation shape experiments"};
    app.require_subcommand(1);

    std::string config_path, out_dir, report_dir, report_kind = "summary";
    std::string spec_arg;
    bool overwrite = false;
    int jobs = 1;

    auto* run = app.add_subcommand("run", "execute an experiment config");
    run->add_option("config", config_path, "config JSON file")->required();
    run->add_option("--out", out_dir, "output directory (default: config out_dir)");
    run->add_flag("--overwrite", overwrite, "replace existing results");
    run->add_option("--jobs", jobs, "parallel sweep cells")->check(CLI::PositiveNumber);

    auto* report = app.add_subcommand("report", "aggregate a results directory");
    report->add_option("dir", report_dir, "results directory")->required();
    report->add_option("--kind", report_kind,
                       "summary | floor_class | correlation");

    auto* props = app.add_subcommand("props", "analytic properties of one activation");
    props->add_option("spec", spec_arg, "kind name or spec JSON file")->required();

    auto* validate = app.add_subcommand("validate", "check a config file");
    validate->add_option("config", config_path, "config JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            std::string out = !out_dir.empty() ? out_dir
                              : !cfg.out_dir.empty() ? cfg.out_dir
                                                     : cfg.name;
            RunOutcome o = run_experiment(cfg, out, overwrite, jobs);
            int failed = 0;
            for (const auto& c : o.cells)
                if (c.status != "ok") ++failed;
            for (const auto& w : o.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << nlohmann::json{{"out", out},
                                        {"rows", o.rows.size()},
                                        {"cells", o.cells.size()},
                                        {"failed_cells", failed}}
                             .dump()
                      << "\n";
            return failed == 0 ? 0 : fail("cell_failure",
                                          std::to_string(failed) +
                                              " cell(s) failed; see manifest.json");
        }
        if (report->parsed()) {
            auto paths = write_report(report_dir, report_kind);
            std::cout << nlohmann::json{{"written", paths}}.dump() << "\n";
            return 0;
        }
        if (props->parsed()) {
            ActivationSpec s = resolve_spec(spec_arg);
            ActivationState st = ActivationState::init(s, 1);
            PropertyGrid g = property_grid(s, st);
            nlohmann::json j = {
                {"activation", s},
                {"sbar",
                 s.kind == ActKind::CReLU
                     ? 1.0
                     : effective_negative_slope(
                           s, st,
                           SlopeDistribution::TruncatedStandardNormalNegative)},
                {"dbw", dead_band_width(s, st)},
                {"properties",
                 {{"hard_dead_zone", g.hdz},
                  {"nonzero_negative_gradient", g.nzg},
                  {"saturates_both", g.sat_both},
                  {"saturates_negative", g.sat_neg},
                  {"c1", g.c1},
                  {"non_monotonic", g.non_monotonic},
                  {"self_normalizing", g.self_normalizing},
                  {"learnable_or_random_slope", g.learnable_or_random_slope},
                  {"nonzero_second_derivative", g.nonzero_second_derivative}}}};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (validate->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            std::cout << nlohmann::json{{"valid", true},
                                        {"name", cfg.name},
                                        {"hash", config_hash(cfg)}}
                             .dump()
                      << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        return fail("runtime", e.what());
    }
    return fail("usage", "no subcommand");
}
