#pragma once

// Readers and writers for the CSV and config files exchanged by the tool.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "climpanel/aggregation.hpp"
#include "climpanel/estimator.hpp"
#include "climpanel/projection.hpp"
#include "climpanel/selection.hpp"
#include "climpanel/weather.hpp"

namespace climpanel::io {

namespace fs = std::filesystem;

// Hourly temperature (cell_id,lat,lon,timestamp,temp_c) and daily
// precipitation (cell_id,date,precip_mm) files, recognized by header.
weather::GridSet read_grid(std::span<const fs::path> files);
void write_grid_hourly(const fs::path& path, const weather::GridSet& grids);
void write_grid_daily(const fs::path& path, const weather::GridSet& grids);

// Cell weights (polygon_id,cell_id,w_cj) and polygon weights
// (province_id,polygon_id,year_from,year_to, then w_jp or population),
// recognized by header. Raw populations are normalized on load.
weather::WeightMap read_weights(std::span<const fs::path> files);
void write_cell_weights(const fs::path& path, const weather::WeightMap& weights);
void write_polygon_weights(const fs::path& path, const weather::WeightMap& weights);

// province_id,year followed by the schema columns.
void write_regressors(const fs::path& path, std::span<const weather::AnnualRegressorSet> rows,
                      const weather::RegressorSchema& schema);

// province_id,year,region_id[,low_income] followed by numeric columns. When
// low_income is absent and income_column exists, provinces are classified by
// their mean income.
PanelDataset read_panel(const fs::path& path, const std::string& income_column = "gpp_pc");
void write_panel(const fs::path& path, const PanelDataset& data);

// Every *.csv in the directory: model,rcp,province_id,year,<regressors>.
std::vector<ClimateScenario> read_climate_dir(const fs::path& dir);
void write_climate(const fs::path& path, const ClimateScenario& climate);

// scenario,year,gdp_pc rows, one path per scenario.
std::vector<SspPath> read_growth_paths(const fs::path& path);
void write_growth_paths(const fs::path& path, std::span<const SspPath> paths);

// province_id,region_id,population[,level_2022].
PopulationShares read_shares(const fs::path& path);
void write_shares(const fs::path& path, const PopulationShares& shares);

// lower_edge,interval.
std::vector<CandidateBinConfig> read_candidates(const fs::path& path);
void write_cv_report(const fs::path& path, const CvReport& report);

// key=value lines; '#' starts a comment.
ModelSpec read_spec(const fs::path& path);
ModelSpec parse_spec(const std::map<std::string, std::string>& entries, const std::string& origin);
void write_spec(const fs::path& path, const ModelSpec& spec);
std::map<std::string, std::string> read_key_values(const fs::path& path);

void write_fit_json(const fs::path& path, const FitResult& fit);
// Coefficients and vcov only; the layout is rebuilt from the spec and columns.
FitResult read_fit_json(const fs::path& path, const ModelSpec& spec, const std::vector<std::string>& columns);

}  // namespace climpanel::io
