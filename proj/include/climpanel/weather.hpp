#pragma once

// Population-weighted aggregation of gridded hourly weather into annual
// province-level regressors.

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace climpanel::weather {

using Date = std::chrono::sys_days;
using Timestamp = std::chrono::sys_seconds;

struct HourlyRecord {
    Timestamp time;
    double temp_c;
};

struct DailyPrecip {
    Date date;
    double precip_mm;
};

// Hourly temperature and daily precipitation of one grid cell. Construction
// validates the series: finite temperatures within [-90, 60] C, strictly
// increasing timestamps, exactly 24 records on every covered UTC day and
// non-negative precipitation.
class GridHourlySeries {
  public:
    GridHourlySeries() = default;
    GridHourlySeries(std::string cell_id, double lat, double lon, std::vector<HourlyRecord> hours,
                     std::vector<DailyPrecip> days);

    const std::string& cell_id() const { return cell_id_; }
    double lat() const { return lat_; }
    double lon() const { return lon_; }

    // The 24 hourly temperatures of a date, empty when the day is not covered.
    std::span<const double> day_temperatures(Date date) const;
    // NaN when the day has no precipitation record.
    double precipitation(Date date) const;

    std::size_t covered_days() const;
    // First and last day of the hourly record; nullopt for an empty series.
    std::optional<std::pair<Date, Date>> temperature_span() const;
    std::optional<std::pair<Date, Date>> precipitation_span() const;

  private:
    std::string cell_id_;
    double lat_ = 0.0;
    double lon_ = 0.0;
    long first_temp_day_ = 0;
    std::vector<double> temps_;  // 24 per day over [first_temp_day_, ...), NaN where uncovered
    long first_precip_day_ = 0;
    std::vector<double> precip_;  // NaN where missing
};

using GridSet = std::unordered_map<std::string, GridHourlySeries>;

struct CellWeight {
    std::string cell_id;
    double weight;  // w_cj
};

struct PolygonWeight {
    std::string polygon_id;
    double weight;  // w_jp
    int year_from;
    int year_to;
};

struct RawPopulation {
    std::string polygon_id;
    double population;
    int year_from;
    int year_to;
};

class WeightMap {
  public:
    WeightMap() = default;
    WeightMap(std::map<std::string, std::vector<CellWeight>> cell_weights,
              std::map<std::string, std::vector<PolygonWeight>> population_weights);

    // Builds w_jp from raw polygon populations, normalized within each
    // province and effective year range.
    static WeightMap from_populations(std::map<std::string, std::vector<CellWeight>> cell_weights,
                                      const std::map<std::string, std::vector<RawPopulation>>& populations);

    // Throws InvalidWeights unless every polygon's cell weights and every
    // province-year's polygon weights sum to one within 1e-9 and all weights
    // lie in [0, 1].
    void validate() const;

    // Polygon weights in effect for a year. Years before the earliest range
    // reuse the earliest range.
    std::vector<PolygonWeight> polygons_for(const std::string& province, int year) const;
    const std::vector<CellWeight>& cells_of(const std::string& polygon) const;

    std::vector<std::string> provinces() const;
    // Inclusive span of years covered by any population weight of the province.
    std::pair<int, int> year_span(const std::string& province) const;

    const std::map<std::string, std::vector<CellWeight>>& cell_weights() const { return cell_weights_; }
    const std::map<std::string, std::vector<PolygonWeight>>& population_weights() const { return population_weights_; }

  private:
    std::map<std::string, std::vector<CellWeight>> cell_weights_;
    std::map<std::string, std::vector<PolygonWeight>> population_weights_;
};

// Layout of the annual regressor vector.
struct RegressorSchema {
    int max_order = 7;
    std::vector<double> temp_bin_edges;                      // ascending, C
    std::vector<std::pair<double, double>> degree_day_pairs;  // (hdd threshold, cdd threshold)
    std::vector<double> precip_bin_edges;                    // ascending, mm; first edge is the dry-day cutoff

    static RegressorSchema defaults();
    void validate() const;
    std::vector<std::string> column_names() const;
};

struct DegreeDays {
    double hdd = 0.0;
    double cdd = 0.0;
};

struct PrecipRegressors {
    double linear = 0.0;
    double squared = 0.0;
    std::vector<double> bin_days;
};

struct AnnualRegressorSet {
    std::string province_id;
    int year = 0;
    std::vector<double> poly_terms;
    std::vector<double> bin_days;
    std::vector<DegreeDays> degree_days;  // one per schema threshold pair
    double precip_linear = 0.0;
    double precip_sq = 0.0;
    std::vector<double> precip_bin_days;

    // Values ordered as RegressorSchema::column_names().
    std::vector<double> values() const;
};

int days_in_year(int year);
std::vector<Date> dates_of_year(int year);

double daily_mean_temperature(const std::string& province, Date date, const GridSet& grids, const WeightMap& weights);

std::vector<double> annual_polynomial_regressors(const std::string& province, int year, int max_order,
                                                 const GridSet& grids, const WeightMap& weights);

// One entry per bin: (-inf, e0), [e0, e1), ..., [e_last, inf).
std::vector<double> annual_bin_days(const std::string& province, int year, std::span<const double> bin_edges,
                                    const GridSet& grids, const WeightMap& weights);

DegreeDays annual_degree_days(const std::string& province, int year, double hdd_threshold, double cdd_threshold,
                              const GridSet& grids, const WeightMap& weights);

// Bins are right-closed: p <= e0 (dry days), (e0, e1], ..., p > e_last.
PrecipRegressors annual_precip_regressors(const std::string& province, int year, std::span<const double> bin_edges,
                                          const GridSet& grids, const WeightMap& weights);

// Running sums behind annual_regressors. add_day takes the sub-daily
// temperatures of one day (any count) and the day's weight.
class RegressorAccumulator {
  public:
    explicit RegressorAccumulator(const RegressorSchema& schema);
    void add_day(std::span<const double> temps, double weight = 1.0);
    void add_precip(double precip_mm, double weight = 1.0);
    AnnualRegressorSet finish(const std::string& province, int year) const;

  private:
    const RegressorSchema* schema_;
    std::vector<long double> poly_, bins_, hdd_, cdd_;
    long double p_lin_ = 0.0L;
    long double p_sq_ = 0.0L;
    std::vector<long double> pbins_;
};

// All regressors of one province-year in a single pass over the data.
AnnualRegressorSet annual_regressors(const std::string& province, int year, const RegressorSchema& schema,
                                     const GridSet& grids, const WeightMap& weights);

struct ProvinceYear {
    std::string province;
    int year;
};

// Every requested province-year, computed across OpenMP threads. Output order
// follows the request order.
std::vector<AnnualRegressorSet> aggregate(std::span<const ProvinceYear> requests, const RegressorSchema& schema,
                                          const GridSet& grids, const WeightMap& weights);

namespace serial {
std::vector<AnnualRegressorSet> aggregate(std::span<const ProvinceYear> requests, const RegressorSchema& schema,
                                          const GridSet& grids, const WeightMap& weights);
}

// Years for which every cell used by the province has complete hourly and
// precipitation coverage.
std::vector<int> covered_years(const std::string& province, const GridSet& grids, const WeightMap& weights);

}  // namespace climpanel::weather
