#pragma once

// Population-weighted aggregation of province projections to regions and
// the nation, and distribution summaries across models and draws.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace climpanel {

struct ProvincePopulation {
    std::string province;
    std::string region;
    double population = 0.0;
    double level_2022 = 1.0;  // GDP per capita in the base year, 1 when unknown
};

class PopulationShares {
  public:
    PopulationShares() = default;
    explicit PopulationShares(std::vector<ProvincePopulation> provinces);

    const std::vector<ProvincePopulation>& provinces() const { return provinces_; }
    std::vector<std::string> regions() const;
    const std::string& region_of(const std::string& province) const;
    double national_share(const std::string& province) const;
    double regional_share(const std::string& province) const;
    double base_level(const std::string& province) const;

  private:
    const ProvincePopulation& get(const std::string& province) const;

    std::vector<ProvincePopulation> provinces_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, double> region_total_;
    double total_ = 0.0;
};

// Levels of one province in one year of one (model, draw) cell.
struct LevelPair {
    double with_climate = 1.0;
    double without_climate = 1.0;
};

using CellLevels = std::map<std::string, LevelPair>;

// sum_p w_p L+_p / sum_p w_p L_p over the provinces of a region, with levels
// scaled by each province's base-year level. IncompleteRegion when a member
// province is missing.
double grp_ratio(const CellLevels& cell, const PopulationShares& shares, const std::string& region);
double gdp_ratio(const CellLevels& cell, const PopulationShares& shares);

// Type-7 (linear interpolation) percentile, q in [0, 100].
double percentile(std::span<const double> values, double q);

struct ImpactSummary {
    double p5 = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
    double prob_positive = 0.0;     // share of cells with ratio > 1
    double prob_nonnegative = 0.0;  // share of cells with ratio >= 1
    std::size_t n_cells = 0;
};

// Percentiles of ratio - 1 across cells.
ImpactSummary summarize(std::span<const double> ratios);

// Median across cells of the population share living in provinces whose
// ratio is below one.
double share_population_negative(std::span<const std::map<std::string, double>> province_ratios,
                                 const PopulationShares& shares);

struct ReportOptions {
    // Draw 0 holds the point estimate and is left out unless no other draw exists.
    bool include_point_draw = false;
};

// Reads the run store under `runs` and writes summary.csv with one row per
// scope (gpp, grp, gdp), unit, variant, rcp, growth scenario and year.
void write_report(const std::filesystem::path& runs, const PopulationShares& shares,
                  const std::filesystem::path& out_csv, const ReportOptions& options = {});

}  // namespace climpanel
