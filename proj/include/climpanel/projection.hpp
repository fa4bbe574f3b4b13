#pragma once

// Growth projections under future climate: climate deltas from fitted
// response functions, no-climate-change growth scenarios, province-block
// bootstrap and the partitioned run store.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "climpanel/estimator.hpp"

namespace climpanel {

// Annual regressors of one climate model under one forcing scenario.
class ClimateScenario {
  public:
    ClimateScenario() = default;
    ClimateScenario(std::string model, std::string rcp, std::vector<std::string> columns);

    void add(const std::string& province, int year, std::vector<double> values);

    const std::string& model() const { return model_; }
    const std::string& rcp() const { return rcp_; }
    const std::vector<std::string>& columns() const { return columns_; }
    std::optional<std::size_t> column_index(const std::string& name) const;
    bool has_province(const std::string& province) const { return data_.contains(province); }
    std::vector<std::string> provinces() const;
    // Values of a province-year ordered as columns(); nullptr when absent.
    const std::vector<double>* find(const std::string& province, int year) const;

  private:
    std::string model_;
    std::string rcp_;
    std::vector<std::string> columns_;
    std::map<std::string, std::map<int, std::vector<double>>> data_;
};

struct ProjectionOptions {
    int first_year = 2023;
    int last_year = 2090;
    std::pair<int, int> baseline_window{2003, 2022};
    std::pair<int, int> bias_window{2018, 2022};
    bool bias_correction = false;
    // Interacted fits only: reassign income groups every year from the
    // previous year's level relative to the cross-province median.
    bool regime_switching = false;
    // Median taken over with-climate levels (true) or no-climate levels.
    bool switch_on_climate_levels = true;
};

// Response-function deltas for one fit and one climate scenario. Term values
// are precomputed so that deltas for many coefficient draws are cheap.
class ClimateDelta {
  public:
    ClimateDelta(const FitResult& fit, const ClimateScenario& climate, const PanelDataset& observed,
                 std::vector<std::string> provinces, const ProjectionOptions& options = {});

    const std::vector<std::string>& provinces() const { return provinces_; }
    int n_lags() const { return n_lags_; }

    // sum_l [h_l(T+_{p,y-l}) - h_l(Tbar_p)].
    double delta(const Eigen::VectorXd& coefficients, std::size_t province, int year, Group group) const;
    // sum_l [h_l(mean projected over the bias window) - h_l(mean observed over it)].
    double bias(const Eigen::VectorXd& coefficients, std::size_t province, Group group) const;

  private:
    double h(const Eigen::VectorXd& coefficients, int lag, Group group, const std::vector<double>& terms) const;
    const std::vector<double>& projected(std::size_t province, int year) const;

    std::vector<std::string> provinces_;
    int n_lags_ = 0;
    int first_year_ = 0;  // first stored projected year
    std::vector<std::vector<std::vector<Eigen::Index>>> index_;  // [group][lag][term], -1 if absent
    std::vector<std::vector<double>> baseline_;                  // [province][term]
    std::vector<std::vector<double>> observed_window_;
    std::vector<std::vector<double>> projected_window_;
    std::vector<std::vector<std::vector<double>>> projected_;  // [province][year - first_year_][term]
};

// Free-function forms over the fit's own coefficients.
double delta(const FitResult& fit, const ClimateScenario& climate, const PanelDataset& observed,
             const std::string& province, int year, Group group = Group::pooled, const ProjectionOptions& options = {});
double bias_correction(const FitResult& fit, const ClimateScenario& climate, const PanelDataset& observed,
                       const std::string& province, Group group = Group::pooled,
                       const ProjectionOptions& options = {});

// Mean observed growth over the window; MissingBaseline if none observed.
double baseline_growth(const PanelDataset& data, const std::string& province, std::pair<int, int> window = {2003, 2022},
                       const std::string& outcome = "growth");

// GDP per capita at sparse years (typically every five years).
struct SspPath {
    std::string name;
    std::vector<std::pair<int, double>> points;  // ascending years
};

// Constant annual rate (a fraction) implied between the bracketing points:
// (G_{k+1} / G_k)^(1 / interval) - 1. OutOfRange outside the path.
double ssp_annual_growth(const SspPath& path, int year);

// g_py = a_p + b * G_{y-1}, with G the cross-province mean growth.
struct Linkage {
    std::map<std::string, double> intercept;
    double slope = 0.0;
};

Linkage estimate_linkage(const PanelDataset& data, std::pair<int, int> window = {2003, 2022},
                         const std::string& outcome = "growth");

// Growth without further climate change, percent per year.
class GrowthScenario {
  public:
    static GrowthScenario baseline(const PanelDataset& data, std::pair<int, int> window = {2003, 2022},
                                   const std::string& outcome = "growth");
    static GrowthScenario ssp(SspPath path, Linkage linkage);

    const std::string& name() const { return name_; }
    double growth(const std::string& province, int year) const;

  private:
    std::string name_;
    std::map<std::string, double> baseline_;
    std::optional<SspPath> path_;
    Linkage linkage_;
};

struct PathPoint {
    int year = 0;
    double g_plus = 0.0;
    double gpp_ratio = 1.0;
    Group group = Group::pooled;
};

struct ProjectionState {
    std::vector<Group> initial_group;   // per province of the delta; pooled for common fits
    std::vector<double> initial_level;  // level in the year before the first projected year
};

// Initial groups from the panel's low-income flag (interacted fits) and
// initial levels from the last observed income value, 1 when unavailable.
ProjectionState initial_state(const FitResult& fit, const PanelDataset& data, const std::vector<std::string>& provinces,
                              const ProjectionOptions& options = {});

// Paths of every province of the delta, projected jointly because regime
// switching compares provinces each year. Result is [province][year].
std::vector<std::vector<PathPoint>> project_paths(const ClimateDelta& delta, const Eigen::VectorXd& coefficients,
                                                  const GrowthScenario& growth, const ProjectionState& state,
                                                  const ProjectionOptions& options = {});

// Chooses the provinces (by index, with replacement) of one bootstrap sample.
using Resampler = std::function<std::vector<int>(std::mt19937_64&, std::size_t n_provinces)>;

struct BootstrapOptions {
    int n_draws = 1000;
    std::uint64_t seed = 20240601;
    // Attempts per draw before giving up on a degenerate resample.
    int max_attempts = 1000;
    Resampler resampler;  // uniform with replacement when empty
};

struct BootstrapResult {
    FitResult point;
    // draws[0] is the point estimate; draws[1..n_draws] are bootstrap fits.
    std::vector<Eigen::VectorXd> draws;
    std::vector<int> redraws;  // per draw, resamples rejected as degenerate

    int total_redraws() const;
};

// Each draw seeds its own generator from (seed, draw), so results do not
// depend on thread count or scheduling.
BootstrapResult block_bootstrap(const PanelDataset& data, const ModelSpec& spec, const BootstrapOptions& options = {});

namespace serial {
BootstrapResult block_bootstrap(const PanelDataset& data, const ModelSpec& spec, const BootstrapOptions& options = {});
}

struct EnsembleVariant {
    std::string name;
    ModelSpec spec;
};

struct EnsembleConfig {
    std::vector<EnsembleVariant> variants;
    BootstrapOptions bootstrap;
    ProjectionOptions projection;
};

struct CellOutcome {
    std::string variant;
    std::string rcp;
    std::string model;
    std::string growth;
    std::filesystem::path file;
    std::string error;  // empty on success
};

struct EnsembleReport {
    std::vector<CellOutcome> cells;
    std::map<std::string, int> redraws;  // per variant

    bool ok() const;
};

// Writes <out>/<variant>/<rcp>/<model>__<growth>.csv with columns
// province,year,model,rcp,growth,draw,g_plus,gpp_ratio ordered by draw,
// province and year, plus <out>/run_log.csv. A failing cell is logged and
// the others still run.
EnsembleReport run_ensemble(const PanelDataset& data, std::span<const ClimateScenario> climates,
                            std::span<const GrowthScenario> growth, const EnsembleConfig& config,
                            const std::filesystem::path& out_dir);

std::string run_file_name(const std::string& model, const std::string& growth);

}  // namespace climpanel
