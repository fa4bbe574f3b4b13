#pragma once

// End-to-end run: aggregate weather, fit, select bins, project, report, and
// record a manifest of inputs, settings and outputs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "climpanel/panel.hpp"
#include "climpanel/projection.hpp"
#include "climpanel/weather.hpp"

namespace climpanel {

struct PipelineConfig {
    std::vector<std::filesystem::path> grid;     // optional; with weights, regressors are recomputed
    std::vector<std::filesystem::path> weights;
    std::filesystem::path panel;
    std::filesystem::path spec;
    std::optional<std::filesystem::path> candidates;
    std::filesystem::path climate;
    std::filesystem::path growth;
    std::filesystem::path shares;
    std::filesystem::path output;
    std::vector<std::pair<std::string, std::filesystem::path>> variants;  // name, spec file; defaults to spec
    std::vector<std::string> scenarios;  // empty: baseline plus every path in the growth file
    int draws = 100;
    std::uint64_t seed = 20240601;
    ProjectionOptions projection;

    // Relative paths resolve against the config file's directory.
    static PipelineConfig read(const std::filesystem::path& path);
};

// Replaces or adds the regressor columns of `panel` with aggregated values
// for matching province-years. Rows without aggregated values keep NaN.
PanelDataset merge_regressors(const PanelDataset& panel, std::span<const weather::AnnualRegressorSet> rows,
                              const weather::RegressorSchema& schema);

// Province-years of the panel that the grid fully covers.
std::vector<weather::ProvinceYear> aggregation_requests(const PanelDataset& panel, const weather::GridSet& grids,
                                                        const weather::WeightMap& weights);

std::string sha256_file(const std::filesystem::path& path);

// Growth scenarios by name: "baseline" or any path name in the growth file.
std::vector<GrowthScenario> growth_scenarios(const PanelDataset& data, const std::filesystem::path& growth_file,
                                             std::vector<std::string> names, const ProjectionOptions& options = {});

// Runs every stage and returns false if any projection cell failed.
bool run_pipeline(const PipelineConfig& config);

}  // namespace climpanel
