#include "climpanel/weather.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "climpanel/errors.hpp"
#include "climpanel/parallel.hpp"
#include "climpanel/schema.hpp"

namespace climpanel::weather {

namespace {

constexpr double weight_tolerance = 1e-9;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

long day_number(Date d) { return static_cast<long>(d.time_since_epoch().count()); }

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

[[noreturn]] void missing(const std::string& cell, Date d, const char* what) {
    fail(ErrorKind::missing_data, fmt::format("cell '{}' has no {} on {}", cell, what, format_date(d)));
}

struct Term {
    double weight;  // w_jp * w_cj
    const GridHourlySeries* cell;
};

// Flattened (polygon, cell) weights of a province for one year.
std::vector<Term> resolve(const std::string& province, int year, const GridSet& grids, const WeightMap& weights) {
    std::vector<Term> terms;
    const auto polygons = weights.polygons_for(province, year);
    if (polygons.empty()) fail(ErrorKind::invalid_weights, "province '" + province + "' has no population weights");
    double total = 0.0;
    for (const auto& pw : polygons) {
        const auto& cells = weights.cells_of(pw.polygon_id);
        if (cells.empty()) fail(ErrorKind::invalid_weights, "polygon '" + pw.polygon_id + "' has no cells");
        double cell_total = 0.0;
        for (const auto& cw : cells) {
            const auto it = grids.find(cw.cell_id);
            if (it == grids.end()) {
                fail(ErrorKind::missing_data, fmt::format("cell '{}' absent from grid (year {})", cw.cell_id, year));
            }
            cell_total += cw.weight;
            terms.push_back({pw.weight * cw.weight, &it->second});
        }
        if (std::abs(cell_total - 1.0) > weight_tolerance) {
            fail(ErrorKind::invalid_weights, fmt::format("polygon '{}' cell weights sum to {}", pw.polygon_id, cell_total));
        }
        total += pw.weight;
    }
    if (std::abs(total - 1.0) > weight_tolerance) {
        fail(ErrorKind::invalid_weights, fmt::format("province '{}' weights sum to {} in {}", province, total, year));
    }
    return terms;
}

std::span<const double> hours_or_throw(const GridHourlySeries& cell, Date d) {
    auto h = cell.day_temperatures(d);
    if (h.empty()) missing(cell.cell_id(), d, "hourly temperature");
    return h;
}

double precip_or_throw(const GridHourlySeries& cell, Date d) {
    const double p = cell.precipitation(d);
    if (std::isnan(p)) missing(cell.cell_id(), d, "precipitation");
    return p;
}

void check_edges(std::span<const double> edges, const char* what) {
    if (edges.empty()) fail(ErrorKind::invalid_bins, std::string(what) + " bin edge list is empty");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (!std::isfinite(edges[i])) fail(ErrorKind::invalid_bins, std::string(what) + " bin edges must be finite");
        if (i > 0 && !(edges[i] > edges[i - 1])) {
            fail(ErrorKind::invalid_bins, std::string(what) + " bin edges must be strictly ascending");
        }
    }
}

std::size_t temp_bin_index(std::span<const double> edges, double t) {
    return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), t) - edges.begin());
}

std::size_t precip_bin_index(std::span<const double> edges, double p) {
    return static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), p) - edges.begin());
}

std::vector<double> rounded(const std::vector<long double>& acc) {
    return std::vector<double>(acc.begin(), acc.end());
}

}  // namespace

GridHourlySeries::GridHourlySeries(std::string cell_id, double lat, double lon, std::vector<HourlyRecord> hours,
                                   std::vector<DailyPrecip> daily)
    : cell_id_(std::move(cell_id)), lat_(lat), lon_(lon) {
    using namespace std::chrono;
    for (std::size_t i = 0; i < hours.size(); ++i) {
        const double t = hours[i].temp_c;
        if (!std::isfinite(t) || t < -90.0 || t > 60.0) {
            fail(ErrorKind::invalid_data, fmt::format("cell '{}': temperature {} outside [-90, 60]", cell_id_, t));
        }
        if (i > 0 && !(hours[i].time > hours[i - 1].time)) {
            fail(ErrorKind::invalid_data, fmt::format("cell '{}': timestamps not strictly increasing", cell_id_));
        }
    }
    if (!hours.empty()) {
        const long first = day_number(floor<days>(hours.front().time));
        const long last = day_number(floor<days>(hours.back().time));
        first_temp_day_ = first;
        temps_.assign(static_cast<std::size_t>(last - first + 1) * 24, nan);
        std::size_t i = 0;
        while (i < hours.size()) {
            const Date d = floor<days>(hours[i].time);
            std::size_t j = i;
            while (j < hours.size() && floor<days>(hours[j].time) == d) ++j;
            if (j - i != 24) {
                fail(ErrorKind::invalid_data,
                     fmt::format("cell '{}': {} hourly records on {}, expected 24", cell_id_, j - i, format_date(d)));
            }
            const auto offset = static_cast<std::size_t>(day_number(d) - first) * 24;
            for (std::size_t h = 0; h < 24; ++h) temps_[offset + h] = hours[i + h].temp_c;
            i = j;
        }
    }
    if (!daily.empty()) {
        std::sort(daily.begin(), daily.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
        first_precip_day_ = day_number(daily.front().date);
        precip_.assign(static_cast<std::size_t>(day_number(daily.back().date) - first_precip_day_ + 1), nan);
        for (std::size_t i = 0; i < daily.size(); ++i) {
            const double p = daily[i].precip_mm;
            if (!std::isfinite(p) || p < 0.0) {
                fail(ErrorKind::invalid_data, fmt::format("cell '{}': invalid precipitation {} on {}", cell_id_, p,
                                                          format_date(daily[i].date)));
            }
            if (i > 0 && daily[i].date == daily[i - 1].date) {
                fail(ErrorKind::invalid_data,
                     fmt::format("cell '{}': duplicate precipitation on {}", cell_id_, format_date(daily[i].date)));
            }
            precip_[static_cast<std::size_t>(day_number(daily[i].date) - first_precip_day_)] = p;
        }
    }
}

std::span<const double> GridHourlySeries::day_temperatures(Date date) const {
    const long k = day_number(date) - first_temp_day_;
    if (k < 0 || static_cast<std::size_t>(k) * 24 >= temps_.size()) return {};
    const auto offset = static_cast<std::size_t>(k) * 24;
    if (std::isnan(temps_[offset])) return {};
    return {temps_.data() + offset, 24};
}

double GridHourlySeries::precipitation(Date date) const {
    const long k = day_number(date) - first_precip_day_;
    if (k < 0 || static_cast<std::size_t>(k) >= precip_.size()) return nan;
    return precip_[static_cast<std::size_t>(k)];
}

std::optional<std::pair<Date, Date>> GridHourlySeries::temperature_span() const {
    if (temps_.empty()) return std::nullopt;
    const Date first{std::chrono::days{first_temp_day_}};
    return std::pair{first, first + std::chrono::days{static_cast<long>(temps_.size() / 24) - 1}};
}

std::optional<std::pair<Date, Date>> GridHourlySeries::precipitation_span() const {
    if (precip_.empty()) return std::nullopt;
    const Date first{std::chrono::days{first_precip_day_}};
    return std::pair{first, first + std::chrono::days{static_cast<long>(precip_.size()) - 1}};
}

std::size_t GridHourlySeries::covered_days() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < temps_.size(); i += 24) n += std::isnan(temps_[i]) ? 0 : 1;
    return n;
}

WeightMap::WeightMap(std::map<std::string, std::vector<CellWeight>> cell_weights,
                     std::map<std::string, std::vector<PolygonWeight>> population_weights)
    : cell_weights_(std::move(cell_weights)), population_weights_(std::move(population_weights)) {}

WeightMap WeightMap::from_populations(std::map<std::string, std::vector<CellWeight>> cell_weights,
                                      const std::map<std::string, std::vector<RawPopulation>>& populations) {
    std::map<std::string, std::vector<PolygonWeight>> out;
    for (const auto& [province, entries] : populations) {
        std::map<std::pair<int, int>, long double> totals;
        for (const auto& e : entries) {
            if (!(e.population >= 0.0)) fail(ErrorKind::invalid_weights, "negative population in '" + province + "'");
            totals[{e.year_from, e.year_to}] += e.population;
        }
        auto& dst = out[province];
        for (const auto& e : entries) {
            const long double total = totals[{e.year_from, e.year_to}];
            if (total <= 0.0L) fail(ErrorKind::invalid_weights, "zero total population in '" + province + "'");
            dst.push_back({e.polygon_id, static_cast<double>(e.population / total), e.year_from, e.year_to});
        }
    }
    return WeightMap(std::move(cell_weights), std::move(out));
}

void WeightMap::validate() const {
    for (const auto& [polygon, cells] : cell_weights_) {
        long double sum = 0.0L;
        for (const auto& c : cells) {
            if (!(c.weight >= 0.0 && c.weight <= 1.0)) {
                fail(ErrorKind::invalid_weights, fmt::format("polygon '{}' cell '{}' weight {} outside [0,1]", polygon,
                                                             c.cell_id, c.weight));
            }
            sum += c.weight;
        }
        if (std::abs(static_cast<double>(sum) - 1.0) > weight_tolerance) {
            fail(ErrorKind::invalid_weights,
                 fmt::format("polygon '{}' cell weights sum to {}", polygon, static_cast<double>(sum)));
        }
    }
    for (const auto& [province, polygons] : population_weights_) {
        std::map<int, long double> per_year;
        for (const auto& p : polygons) {
            if (!(p.weight >= 0.0 && p.weight <= 1.0)) {
                fail(ErrorKind::invalid_weights, fmt::format("province '{}' polygon '{}' weight {} outside [0,1]",
                                                             province, p.polygon_id, p.weight));
            }
            if (p.year_to < p.year_from) {
                fail(ErrorKind::invalid_weights, fmt::format("province '{}' polygon '{}' has an empty year range",
                                                             province, p.polygon_id));
            }
            if (!cell_weights_.contains(p.polygon_id)) {
                fail(ErrorKind::invalid_weights, fmt::format("province '{}' references unknown polygon '{}'", province,
                                                             p.polygon_id));
            }
            for (int y = p.year_from; y <= p.year_to; ++y) per_year[y] += p.weight;
        }
        for (const auto& [y, sum] : per_year) {
            if (std::abs(static_cast<double>(sum) - 1.0) > weight_tolerance) {
                fail(ErrorKind::invalid_weights, fmt::format("province '{}' population weights sum to {} in {}",
                                                             province, static_cast<double>(sum), y));
            }
        }
    }
}

std::vector<PolygonWeight> WeightMap::polygons_for(const std::string& province, int year) const {
    const auto it = population_weights_.find(province);
    if (it == population_weights_.end()) return {};
    std::vector<PolygonWeight> out;
    int earliest = std::numeric_limits<int>::max();
    for (const auto& p : it->second) {
        if (p.year_from <= year && year <= p.year_to) out.push_back(p);
        earliest = std::min(earliest, p.year_from);
    }
    if (out.empty() && year < earliest) {
        for (const auto& p : it->second) {
            if (p.year_from == earliest) out.push_back(p);
        }
    }
    return out;
}

const std::vector<CellWeight>& WeightMap::cells_of(const std::string& polygon) const {
    static const std::vector<CellWeight> none;
    const auto it = cell_weights_.find(polygon);
    return it == cell_weights_.end() ? none : it->second;
}

std::vector<std::string> WeightMap::provinces() const {
    std::vector<std::string> out;
    for (const auto& [p, _] : population_weights_) out.push_back(p);
    return out;
}

std::pair<int, int> WeightMap::year_span(const std::string& province) const {
    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    const auto it = population_weights_.find(province);
    if (it != population_weights_.end()) {
        for (const auto& p : it->second) {
            lo = std::min(lo, p.year_from);
            hi = std::max(hi, p.year_to);
        }
    }
    return {lo, hi};
}

RegressorSchema RegressorSchema::defaults() {
    RegressorSchema s;
    s.max_order = 7;
    for (int e = 10; e <= 40; ++e) s.temp_bin_edges.push_back(e);
    s.degree_day_pairs = {{23.0, 28.0}};
    s.precip_bin_edges = {0.0, 10.0, 20.0, 30.0, 40.0};
    return s;
}

void RegressorSchema::validate() const {
    if (max_order < 1 || max_order > 7) fail(ErrorKind::invalid_argument, "polynomial order must be in 1..7");
    check_edges(temp_bin_edges, "temperature");
    check_edges(precip_bin_edges, "precipitation");
    if (precip_bin_edges.front() < 0.0) fail(ErrorKind::invalid_bins, "precipitation edges must be non-negative");
    for (const auto& [h, c] : degree_day_pairs) {
        if (h > c) fail(ErrorKind::invalid_argument, "hdd threshold exceeds cdd threshold");
    }
}

std::vector<std::string> RegressorSchema::column_names() const {
    std::vector<std::string> names;
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int m = 1; m <= max_order; ++m) names.push_back(schema::poly_column(m));
    for (std::size_t b = 0; b <= temp_bin_edges.size(); ++b) {
        const double lo = b == 0 ? -inf : temp_bin_edges[b - 1];
        const double hi = b == temp_bin_edges.size() ? inf : temp_bin_edges[b];
        names.push_back(schema::temp_bin_column(lo, hi));
    }
    for (const auto& [h, c] : degree_day_pairs) {
        names.push_back(schema::hdd_column(h));
        names.push_back(schema::cdd_column(c));
    }
    names.emplace_back(schema::precip_linear);
    names.emplace_back(schema::precip_sq);
    for (std::size_t b = 0; b <= precip_bin_edges.size(); ++b) names.push_back(schema::precip_bin_column(int(b) + 1));
    return names;
}

std::vector<double> AnnualRegressorSet::values() const {
    std::vector<double> v(poly_terms);
    v.insert(v.end(), bin_days.begin(), bin_days.end());
    for (const auto& dd : degree_days) {
        v.push_back(dd.hdd);
        v.push_back(dd.cdd);
    }
    v.push_back(precip_linear);
    v.push_back(precip_sq);
    v.insert(v.end(), precip_bin_days.begin(), precip_bin_days.end());
    return v;
}

int days_in_year(int year) { return std::chrono::year{year}.is_leap() ? 366 : 365; }

std::vector<Date> dates_of_year(int year) {
    using namespace std::chrono;
    std::vector<Date> out;
    const Date first = std::chrono::year{year} / January / 1;
    const int n = days_in_year(year);
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(first + days{i});
    return out;
}

double daily_mean_temperature(const std::string& province, Date date, const GridSet& grids, const WeightMap& weights) {
    const int year = static_cast<int>(std::chrono::year_month_day{date}.year());
    long double total = 0.0L;
    for (const auto& term : resolve(province, year, grids, weights)) {
        long double day = 0.0L;
        for (double t : hours_or_throw(*term.cell, date)) day += t;
        total += term.weight * day / 24.0L;
    }
    return static_cast<double>(total);
}

std::vector<double> annual_polynomial_regressors(const std::string& province, int year, int max_order,
                                                 const GridSet& grids, const WeightMap& weights) {
    if (max_order < 1 || max_order > 7) fail(ErrorKind::invalid_argument, "polynomial order must be in 1..7");
    const auto terms = resolve(province, year, grids, weights);
    std::vector<long double> acc(static_cast<std::size_t>(max_order), 0.0L);
    for (const Date d : dates_of_year(year)) {
        for (const auto& term : terms) {
            for (double t : hours_or_throw(*term.cell, d)) {
                long double power = 1.0L;
                for (int m = 0; m < max_order; ++m) {
                    power *= t;
                    acc[static_cast<std::size_t>(m)] += term.weight * power / 24.0L;
                }
            }
        }
    }
    return rounded(acc);
}

std::vector<double> annual_bin_days(const std::string& province, int year, std::span<const double> bin_edges,
                                    const GridSet& grids, const WeightMap& weights) {
    check_edges(bin_edges, "temperature");
    const auto terms = resolve(province, year, grids, weights);
    std::vector<long double> acc(bin_edges.size() + 1, 0.0L);
    for (const Date d : dates_of_year(year)) {
        for (const auto& term : terms) {
            for (double t : hours_or_throw(*term.cell, d)) acc[temp_bin_index(bin_edges, t)] += term.weight / 24.0L;
        }
    }
    return rounded(acc);
}

DegreeDays annual_degree_days(const std::string& province, int year, double hdd_threshold, double cdd_threshold,
                              const GridSet& grids, const WeightMap& weights) {
    if (hdd_threshold > cdd_threshold) fail(ErrorKind::invalid_argument, "hdd threshold exceeds cdd threshold");
    const auto terms = resolve(province, year, grids, weights);
    long double hdd = 0.0L;
    long double cdd = 0.0L;
    for (const Date d : dates_of_year(year)) {
        for (const auto& term : terms) {
            for (double t : hours_or_throw(*term.cell, d)) {
                hdd += term.weight * std::max(0.0, hdd_threshold - t) / 24.0L;
                cdd += term.weight * std::max(0.0, t - cdd_threshold) / 24.0L;
            }
        }
    }
    return {static_cast<double>(hdd), static_cast<double>(cdd)};
}

PrecipRegressors annual_precip_regressors(const std::string& province, int year, std::span<const double> bin_edges,
                                          const GridSet& grids, const WeightMap& weights) {
    check_edges(bin_edges, "precipitation");
    const auto terms = resolve(province, year, grids, weights);
    long double linear = 0.0L;
    long double squared = 0.0L;
    std::vector<long double> bins(bin_edges.size() + 1, 0.0L);
    for (const Date d : dates_of_year(year)) {
        for (const auto& term : terms) {
            const double p = precip_or_throw(*term.cell, d);
            linear += term.weight * static_cast<long double>(p);
            squared += term.weight * static_cast<long double>(p) * p;
            bins[precip_bin_index(bin_edges, p)] += term.weight;
        }
    }
    return {static_cast<double>(linear), static_cast<double>(squared), rounded(bins)};
}

RegressorAccumulator::RegressorAccumulator(const RegressorSchema& schema)
    : schema_(&schema),
      poly_(static_cast<std::size_t>(schema.max_order), 0.0L),
      bins_(schema.temp_bin_edges.size() + 1, 0.0L),
      hdd_(schema.degree_day_pairs.size(), 0.0L),
      cdd_(schema.degree_day_pairs.size(), 0.0L),
      pbins_(schema.precip_bin_edges.size() + 1, 0.0L) {}

void RegressorAccumulator::add_day(std::span<const double> temps, double weight) {
    const long double w = weight / static_cast<long double>(temps.size());
    const auto& dd = schema_->degree_day_pairs;
    for (double t : temps) {
        long double power = 1.0L;
        for (auto& p : poly_) {
            power *= t;
            p += w * power;
        }
        bins_[temp_bin_index(schema_->temp_bin_edges, t)] += w;
        for (std::size_t k = 0; k < dd.size(); ++k) {
            hdd_[k] += w * std::max(0.0, dd[k].first - t);
            cdd_[k] += w * std::max(0.0, t - dd[k].second);
        }
    }
}

void RegressorAccumulator::add_precip(double p, double weight) {
    p_lin_ += weight * static_cast<long double>(p);
    p_sq_ += weight * static_cast<long double>(p) * p;
    pbins_[precip_bin_index(schema_->precip_bin_edges, p)] += weight;
}

AnnualRegressorSet RegressorAccumulator::finish(const std::string& province, int year) const {
    AnnualRegressorSet out;
    out.province_id = province;
    out.year = year;
    out.poly_terms = rounded(poly_);
    out.bin_days = rounded(bins_);
    for (std::size_t k = 0; k < hdd_.size(); ++k) {
        out.degree_days.push_back({static_cast<double>(hdd_[k]), static_cast<double>(cdd_[k])});
    }
    out.precip_linear = static_cast<double>(p_lin_);
    out.precip_sq = static_cast<double>(p_sq_);
    out.precip_bin_days = rounded(pbins_);
    return out;
}

AnnualRegressorSet annual_regressors(const std::string& province, int year, const RegressorSchema& schema,
                                     const GridSet& grids, const WeightMap& weights) {
    const auto terms = resolve(province, year, grids, weights);
    RegressorAccumulator acc(schema);
    for (const Date d : dates_of_year(year)) {
        for (const auto& term : terms) {
            acc.add_day(hours_or_throw(*term.cell, d), term.weight);
            acc.add_precip(precip_or_throw(*term.cell, d), term.weight);
        }
    }
    return acc.finish(province, year);
}

std::vector<AnnualRegressorSet> aggregate(std::span<const ProvinceYear> requests, const RegressorSchema& schema,
                                          const GridSet& grids, const WeightMap& weights) {
    schema.validate();
    std::vector<AnnualRegressorSet> out(requests.size());
    parallel_for(requests.size(), [&](std::size_t i) {
        out[i] = annual_regressors(requests[i].province, requests[i].year, schema, grids, weights);
    });
    return out;
}

namespace serial {
std::vector<AnnualRegressorSet> aggregate(std::span<const ProvinceYear> requests, const RegressorSchema& schema,
                                          const GridSet& grids, const WeightMap& weights) {
    schema.validate();
    std::vector<AnnualRegressorSet> out;
    out.reserve(requests.size());
    for (const auto& r : requests) out.push_back(annual_regressors(r.province, r.year, schema, grids, weights));
    return out;
}
}  // namespace serial

std::vector<int> covered_years(const std::string& province, const GridSet& grids, const WeightMap& weights) {
    std::set<std::string> cells;
    const auto it = weights.population_weights().find(province);
    if (it == weights.population_weights().end()) return {};
    for (const auto& pw : it->second) {
        for (const auto& cw : weights.cells_of(pw.polygon_id)) cells.insert(cw.cell_id);
    }
    for (const auto& id : cells) {
        if (!grids.contains(id)) return {};
    }
    if (cells.empty()) return {};
    // Candidate years come from the first cell's span; each must be complete in every cell.
    const auto span = grids.at(*cells.begin()).temperature_span();
    if (!span) return {};
    const int y0 = static_cast<int>(std::chrono::year_month_day{span->first}.year());
    const int y1 = static_cast<int>(std::chrono::year_month_day{span->second}.year());
    std::vector<int> out;
    for (int y = y0; y <= y1; ++y) {
        bool complete = true;
        for (const Date d : dates_of_year(y)) {
            for (const auto& id : cells) {
                const auto& cell = grids.at(id);
                if (cell.day_temperatures(d).empty() || std::isnan(cell.precipitation(d))) {
                    complete = false;
                    break;
                }
            }
            if (!complete) break;
        }
        if (complete) out.push_back(y);
    }
    return out;
}

}  // namespace climpanel::weather
