// climpanel: weather aggregation, panel estimation and growth projections.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure,
// 4 configuration or usage error.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>

#include "climpanel/aggregation.hpp"
#include "climpanel/errors.hpp"
#include "climpanel/io.hpp"
#include "climpanel/pipeline.hpp"
#include "climpanel/selection.hpp"
#include "climpanel/synthetic.hpp"

namespace fs = std::filesystem;
using namespace climpanel;

namespace {

int run_aggregate(const std::vector<fs::path>& grid, const std::vector<fs::path>& weight_files,
                  const std::optional<fs::path>& panel_path, int from, int to, const fs::path& out, bool serial_run) {
    const auto grids = io::read_grid(grid);
    const auto weights = io::read_weights(weight_files);
    const auto schema = weather::RegressorSchema::defaults();
    std::vector<weather::ProvinceYear> req;
    if (panel_path) {
        req = aggregation_requests(io::read_panel(*panel_path), grids, weights);
    } else {
        for (const auto& p : weights.provinces()) {
            for (int y : weather::covered_years(p, grids, weights)) {
                if ((from == 0 || y >= from) && (to == 0 || y <= to)) req.push_back({p, y});
            }
        }
    }
    const auto rows = serial_run ? weather::serial::aggregate(req, schema, grids, weights)
                                 : weather::aggregate(req, schema, grids, weights);
    io::write_regressors(out, rows, schema);
    fmt::print("wrote {} province-years to {}\n", rows.size(), out.string());
    return 0;
}

int run_fit(const fs::path& panel_path, const fs::path& spec_path, const fs::path& out) {
    const auto panel = io::read_panel(panel_path);
    const auto spec = io::read_spec(spec_path);
    const auto result = spec.interaction == Interaction::low_income ? fit_interacted(spec, panel) : fit(spec, panel);
    io::write_fit_json(out, result);
    fmt::print("{:<24} {:>14} {:>14}\n", "term", "estimate", "std.err");
    for (std::size_t i = 0; i < result.names().size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        fmt::print("{:<24} {:>14.6g} {:>14.6g}\n", result.names()[i], result.coefficients[k],
                   std::sqrt(std::max(0.0, result.vcov(k, k))));
    }
    fmt::print("n={} clusters={} r2={:.4f} within_r2={:.4f}\n", result.n_obs, result.cluster_count, result.r2,
               result.within_r2);
    return 0;
}

int run_select(const fs::path& panel_path, const fs::path& candidates_path, const std::optional<fs::path>& base_spec,
               int split_year, const fs::path& out) {
    const auto panel = io::read_panel(panel_path);
    SelectionOptions options;
    options.split_year = split_year;
    if (base_spec) options.base = io::read_spec(*base_spec);
    const auto candidates = io::read_candidates(candidates_path);
    const auto report = select(candidates, panel, options);
    io::write_cv_report(out, report);
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        const auto& s = report.scores[i];
        fmt::print("[{}, {}) width {}  oot {:.6f}  oos {:.6f}{}\n", s.candidate.lower_edge,
                   s.candidate.lower_edge + s.candidate.interval, s.candidate.interval, s.rmse_oot, s.rmse_oos,
                   i == report.winner ? "  <- selected" : "");
    }
    return 0;
}

struct ProjectArgs {
    fs::path panel, spec, climate, growth, out;
    std::string variant = "main";
    std::vector<std::string> scenarios;
    int draws = 100;
    std::uint64_t seed = 20240601;
    bool bias_correction = false;
    bool regime_switching = false;
    bool switch_on_baseline = false;
};

int run_project(const ProjectArgs& a) {
    const auto panel = io::read_panel(a.panel);
    EnsembleConfig config;
    config.variants.push_back({a.variant, io::read_spec(a.spec)});
    config.bootstrap.n_draws = a.draws;
    config.bootstrap.seed = a.seed;
    config.projection.bias_correction = a.bias_correction;
    config.projection.regime_switching = a.regime_switching;
    config.projection.switch_on_climate_levels = !a.switch_on_baseline;
    const auto climates = io::read_climate_dir(a.climate);
    const auto growth = growth_scenarios(panel, a.growth, a.scenarios, config.projection);
    const auto report = run_ensemble(panel, climates, growth, config, a.out);
    for (const auto& c : report.cells) {
        if (!c.error.empty()) fmt::print(stderr, "{}/{}/{}/{}: {}\n", c.variant, c.rcp, c.model, c.growth, c.error);
    }
    for (const auto& [v, n] : report.redraws) fmt::print("{}: {} degenerate resamples redrawn\n", v, n);
    fmt::print("{} cells written under {}\n", report.cells.size(), a.out.string());
    return report.ok() ? 0 : 3;
}

int run_validate(const std::vector<fs::path>& grid, const std::vector<fs::path>& weights,
                 const std::optional<fs::path>& panel, const std::optional<fs::path>& climate,
                 const std::optional<fs::path>& growth, const std::optional<fs::path>& shares,
                 const std::optional<fs::path>& spec) {
    int problems = 0;
    int worst = 0;
    const auto check = [&](const std::string& what, auto&& load) {
        try {
            load();
            fmt::print("ok      {}\n", what);
        } catch (const Error& e) {
            ++problems;
            worst = std::max(worst, exit_code(e.kind()));
            fmt::print("FAILED  {}: {}\n", what, e.what());
        }
    };
    if (!grid.empty()) check("grid", [&] { io::read_grid(grid); });
    if (!weights.empty()) check("weights", [&] { io::read_weights(weights); });
    if (panel) check(panel->string(), [&] { io::read_panel(*panel); });
    if (climate) check(climate->string(), [&] { io::read_climate_dir(*climate); });
    if (growth) check(growth->string(), [&] { io::read_growth_paths(*growth); });
    if (shares) check(shares->string(), [&] { io::read_shares(*shares); });
    if (spec) check(spec->string(), [&] { io::read_spec(*spec); });
    if (problems == 0) return 0;
    return worst == 4 ? 4 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Panel estimation of temperature effects on growth and climate projections"};
    app.require_subcommand(1);

    std::vector<fs::path> grid, weights;
    std::optional<fs::path> panel_opt, climate_opt, growth_opt, shares_opt, spec_opt, base_spec;
    fs::path panel, spec, out, candidates, runs, shares, config;
    int from = 0, to = 0, split_year = 2014;
    bool serial_run = false;

    auto* agg = app.add_subcommand("aggregate", "Aggregate gridded weather to annual province regressors");
    agg->add_option("--grid", grid, "Hourly temperature and daily precipitation files")->required()->delimiter(',')->check(CLI::ExistingFile);
    agg->add_option("--weights", weights, "Cell and polygon weight files")->required()->delimiter(',')->check(CLI::ExistingFile);
    agg->add_option("--panel", panel_opt, "Aggregate only the province-years of this panel")->check(CLI::ExistingFile);
    agg->add_option("--from", from, "First year (default: all covered)");
    agg->add_option("--to", to, "Last year (default: all covered)");
    agg->add_option("--out", out, "Output CSV")->required();
    agg->add_flag("--serial", serial_run, "Use the single-threaded reference path");

    auto* fit_cmd = app.add_subcommand("fit", "Estimate a response function");
    fit_cmd->add_option("--panel", panel, "Panel CSV")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--spec", spec, "Model spec (key=value)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--out", out, "Output JSON")->required();

    auto* sel = app.add_subcommand("select-spec", "Cross-validate omitted-bin candidates");
    sel->add_option("--panel", panel, "Panel CSV")->required()->check(CLI::ExistingFile);
    sel->add_option("--candidates", candidates, "CSV of lower_edge,interval")->required()->check(CLI::ExistingFile);
    sel->add_option("--base-spec", base_spec, "Spec supplying fixed effects and controls")->check(CLI::ExistingFile);
    sel->add_option("--split-year", split_year, "Last training year");
    sel->add_option("--out", out, "Output CSV")->required();

    ProjectArgs pa;
    auto* proj = app.add_subcommand("project", "Bootstrap and project growth paths");
    proj->add_option("--panel", pa.panel, "Panel CSV")->required()->check(CLI::ExistingFile);
    proj->add_option("--spec", pa.spec, "Model spec")->required()->check(CLI::ExistingFile);
    proj->add_option("--climate,--climate-dir", pa.climate, "Directory of projected climate CSVs")->required()->check(CLI::ExistingDirectory);
    proj->add_option("--growth", pa.growth, "GDP per capita paths")->required()->check(CLI::ExistingFile);
    proj->add_option("--out", pa.out, "Run store directory")->required();
    proj->add_option("--variant", pa.variant, "Variant name used in the run store");
    proj->add_option("--scenarios", pa.scenarios, "Growth scenarios (default: baseline and every path)")->delimiter(',');
    proj->add_option("--draws", pa.draws, "Bootstrap draws")->check(CLI::NonNegativeNumber);
    proj->add_option("--seed", pa.seed, "Random seed")->required();
    proj->add_flag("--bias-correction", pa.bias_correction, "Remove the projected-minus-observed offset");
    proj->add_flag("--regime-switching", pa.regime_switching, "Reassign income groups every year");
    proj->add_flag("--switch-on-baseline", pa.switch_on_baseline, "Median for switching over no-climate levels");

    auto* rep = app.add_subcommand("report", "Summarize a run store");
    rep->add_option("--runs", runs, "Run store directory")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--shares", shares, "Population shares CSV")->required()->check(CLI::ExistingFile);
    rep->add_option("--out", out, "Output CSV")->required();

    synth::Options so;
    auto* syn = app.add_subcommand("synth", "Write a synthetic input set");
    syn->add_option("--out", out, "Output directory")->required();
    syn->add_option("--provinces", so.n_provinces, "Province count")->check(CLI::PositiveNumber);
    syn->add_option("--first-year", so.first_year, "First historical year");
    syn->add_option("--last-year", so.last_year, "Last historical year");
    syn->add_option("--models", so.n_models, "Climate models per scenario")->check(CLI::PositiveNumber);
    syn->add_option("--seed", so.seed, "Random seed");
    syn->add_option("--noise", so.noise_sd, "Growth noise SD")->check(CLI::NonNegativeNumber);

    auto* val = app.add_subcommand("validate", "Check input files");
    val->add_option("--grid", grid, "Grid files")->delimiter(',');
    val->add_option("--weights", weights, "Weight files")->delimiter(',');
    val->add_option("--panel", panel_opt, "Panel CSV");
    val->add_option("--climate,--climate-dir", climate_opt, "Climate directory");
    val->add_option("--growth", growth_opt, "GDP per capita paths");
    val->add_option("--shares", shares_opt, "Population shares");
    val->add_option("--spec", spec_opt, "Model spec");

    auto* pipe = app.add_subcommand("pipeline", "Run every stage from a config file");
    pipe->add_option("--config", config, "Pipeline config (key=value)")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        if (*agg) return run_aggregate(grid, weights, panel_opt, from, to, out, serial_run);
        if (*fit_cmd) return run_fit(panel, spec, out);
        if (*sel) return run_select(panel, candidates, base_spec, split_year, out);
        if (*proj) return run_project(pa);
        if (*rep) {
            write_report(runs, io::read_shares(shares), out);
            fmt::print("wrote {}\n", out.string());
            return 0;
        }
        if (*syn) {
            synth::write_fixtures(so, out);
            fmt::print("wrote synthetic inputs to {}\n", out.string());
            return 0;
        }
        if (*val) return run_validate(grid, weights, panel_opt, climate_opt, growth_opt, shares_opt, spec_opt);
        if (*pipe) return run_pipeline(PipelineConfig::read(config)) ? 0 : 3;
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 3;
    }
    return 0;
}
