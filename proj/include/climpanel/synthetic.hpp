#pragma once

// Synthetic panels with a known temperature response, for tests, benchmarks
// and demonstrations.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "climpanel/panel.hpp"
#include "climpanel/weather.hpp"

namespace climpanel::synth {

enum class Response { quadratic, bins };

struct Options {
    int n_provinces = 6;
    int n_regions = 2;
    int first_year = 1993;
    int last_year = 2022;
    std::uint64_t seed = 7;

    // Growth = response + precip_coef * prcp + province effect + year effect + noise.
    Response response = Response::quadratic;
    double beta1 = 0.05;    // on temp_p1
    double beta2 = -0.001;  // on temp_p2
    std::vector<double> bin_edges{13, 18, 23, 28, 33, 38};
    std::vector<double> bin_effects{-0.02, -0.01, -0.005, 0.0, -0.03, -0.06, -0.1};  // per bin, days
    double precip_coef = 0.0;
    double fe_scale = 1.0;
    // Shift province effects so mean growth is near 3%. Off with fe_scale 0
    // gives a panel with no fixed effects at all.
    bool center_growth = true;
    double noise_sd = 1.0;
    double noise_rho = 0.0;  // within-province AR(1) coefficient

    // Climate.
    double mean_temp_lo = 20.0;
    double mean_temp_hi = 30.0;
    double seasonal_amplitude = 5.0;
    double daily_sd = 2.5;
    double annual_sd = 0.6;
    double diurnal_amplitude = 4.0;

    // Projected climate of the fixture set.
    int n_models = 2;
    int projection_first_year = 2018;
    int projection_last_year = 2090;
    double model_offset = 0.3;  // model m runs m * offset degrees warm
};

// Daily-resolution panel (each day's hours share one temperature) with the
// default regressor schema, region_id, gpp_pc and a low-income flag.
PanelDataset panel(const Options& options);

// Response of one province-year given its daily temperatures.
double response(const Options& options, const weather::AnnualRegressorSet& regressors);

// Writes a complete input set: grid_hourly.csv, grid_daily.csv,
// weights_cells.csv, weights_polygons.csv, panel.csv, climate/*.csv,
// growth.csv, shares.csv, spec.cfg, candidates.csv and pipeline.cfg.
void write_fixtures(const Options& options, const std::filesystem::path& dir);

}  // namespace climpanel::synth
