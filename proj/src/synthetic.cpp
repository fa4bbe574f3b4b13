#include "climpanel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "climpanel/csv.hpp"
#include "climpanel/errors.hpp"
#include "climpanel/io.hpp"
#include "climpanel/schema.hpp"

namespace climpanel::synth {

namespace fs = std::filesystem;
using weather::Date;

namespace {

constexpr double rain_probability = 0.35;
constexpr double mean_rain_mm = 10.0;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
    return std::mt19937_64(seq);
}

double round_to(double v, double step) { return std::round(v / step) * step; }

std::string province_id(int p, int n) { return fmt::format("P{:0{}d}", p + 1, n > 99 ? 3 : 2); }
std::string region_id(int p, int n_regions) { return fmt::format("R{}", p % std::max(1, n_regions) + 1); }

double location_mean(const Options& o, int index, int count) {
    if (count <= 1) return 0.5 * (o.mean_temp_lo + o.mean_temp_hi);
    return o.mean_temp_lo + (o.mean_temp_hi - o.mean_temp_lo) * index / (count - 1);
}

// Shock shared by every location in a year.
double common_shock(const Options& o, int year) {
    auto rng = stream(o.seed, 0xC0, static_cast<std::uint64_t>(year), 0);
    return std::normal_distribution<double>(0.0, o.annual_sd * std::sqrt(0.5))(rng);
}

struct LocationYear {
    std::vector<double> day_mean;  // one per day of the year
    std::vector<double> precip;
};

// Daily weather of one location in one year. `tag` separates historical
// weather from each projected scenario.
LocationYear simulate(const Options& o, double mean, int location, int year, std::uint64_t tag, double shift) {
    auto rng = stream(o.seed, static_cast<std::uint64_t>(location) + 1, static_cast<std::uint64_t>(year), tag);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    std::exponential_distribution<double> rain(1.0 / mean_rain_mm);
    const double anomaly = common_shock(o, year) + o.annual_sd * std::sqrt(0.5) * normal(rng);
    const double spread = o.daily_sd * (0.7 + 0.6 * unit(rng));
    const int n = weather::days_in_year(year);
    LocationYear out;
    out.day_mean.resize(static_cast<std::size_t>(n));
    out.precip.resize(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) {
        const double season = o.seasonal_amplitude * std::sin(2.0 * std::numbers::pi * (d - 105) / 365.25);
        out.day_mean[static_cast<std::size_t>(d)] = mean + shift + anomaly + season + spread * normal(rng);
        out.precip[static_cast<std::size_t>(d)] = unit(rng) < rain_probability ? round_to(rain(rng), 0.1) : 0.0;
    }
    return out;
}

// Coarse response bin of every fine schema bin. The response edges must be a
// subset of the schema edges.
std::vector<std::size_t> tile(const std::vector<double>& fine, const std::vector<double>& coarse) {
    for (double e : coarse) {
        if (std::find(fine.begin(), fine.end(), e) == fine.end()) {
            fail(ErrorKind::invalid_bins, fmt::format("response edge {} is not a regressor bin edge", e));
        }
    }
    std::vector<std::size_t> map;
    for (std::size_t i = 0; i <= fine.size(); ++i) {
        const double lower = i == 0 ? fine.front() - 1.0 : fine[i - 1];
        map.push_back(static_cast<std::size_t>(std::upper_bound(coarse.begin(), coarse.end(), lower) - coarse.begin()));
    }
    return map;
}

struct GrowthDraws {
    std::vector<double> province_effect;
    std::vector<double> year_effect;
};

// Fills growth and gpp_pc for every row, given the response of each row.
void add_outcomes(const Options& o, PanelDataset& data, const std::vector<double>& resp,
                  const std::vector<double>& precip) {
    const auto n_prov = data.province_count();
    auto rng = stream(o.seed, 0xFE, 0, 0);
    std::normal_distribution<double> normal;
    std::vector<double> alpha(n_prov), base_level(n_prov);
    for (auto& a : alpha) a = o.fe_scale * normal(rng);
    for (auto& b : base_level) b = 10000.0 * std::exp(0.4 * normal(rng));
    std::map<int, double> year_effect;
    for (std::size_t r = 0; r < data.rows(); ++r) year_effect.emplace(data.year(r), 0.0);
    for (auto& [y, e] : year_effect) e = o.fe_scale * normal(rng);

    if (o.center_growth) {
        std::vector<double> sum(n_prov, 0.0);
        std::vector<int> count(n_prov, 0);
        for (std::size_t r = 0; r < data.rows(); ++r) {
            const auto p = static_cast<std::size_t>(data.province_index(r));
            sum[p] += resp[r] + o.precip_coef * precip[r];
            ++count[p];
        }
        for (std::size_t p = 0; p < n_prov; ++p) alpha[p] += 3.0 - sum[p] / count[p];
    }

    std::vector<double> growth(data.rows()), income(data.rows());
    const double innovation = o.noise_sd * std::sqrt(1.0 - o.noise_rho * o.noise_rho);
    for (std::size_t p = 0; p < n_prov; ++p) {
        auto noise_rng = stream(o.seed, 0xE0, p, 0);
        double e = o.noise_sd * normal(noise_rng);
        double level = base_level[p];
        for (std::size_t r : data.rows_of(static_cast<int>(p))) {
            const double g = resp[r] + o.precip_coef * precip[r] + alpha[p] + year_effect[data.year(r)] + e;
            growth[r] = g;
            level *= 1.0 + g / 100.0;
            income[r] = level;
            e = o.noise_rho * e + innovation * normal(noise_rng);
        }
    }
    data.set_column(std::string(schema::growth), std::move(growth));
    data.set_column(std::string(schema::income), std::move(income));
    data.classify_low_income(std::string(schema::income));
}

std::vector<std::string> panel_columns(const weather::RegressorSchema& schema) {
    auto cols = schema.column_names();
    cols.emplace_back(schema::growth);
    cols.emplace_back(schema::income);
    return cols;
}

}  // namespace

double response(const Options& o, const weather::AnnualRegressorSet& regressors) {
    if (o.response == Response::quadratic) return o.beta1 * regressors.poly_terms.at(0) + o.beta2 * regressors.poly_terms.at(1);
    if (o.bin_effects.size() != o.bin_edges.size() + 1) {
        fail(ErrorKind::invalid_bins, "response needs one effect per bin");
    }
    const auto fine = weather::RegressorSchema::defaults().temp_bin_edges;
    if (regressors.bin_days.size() != fine.size() + 1) fail(ErrorKind::invalid_bins, "regressors use a different bin schema");
    const auto map = tile(fine, o.bin_edges);
    double total = 0.0;
    for (std::size_t i = 0; i < regressors.bin_days.size(); ++i) total += o.bin_effects[map[i]] * regressors.bin_days[i];
    return total;
}

PanelDataset panel(const Options& o) {
    if (o.n_provinces < 1 || o.last_year < o.first_year) fail(ErrorKind::invalid_argument, "empty synthetic panel");
    const auto schema = weather::RegressorSchema::defaults();
    const auto reg_cols = schema.column_names();
    PanelDataset data(panel_columns(schema));
    std::vector<double> resp, precip;
    std::vector<double> values(reg_cols.size() + 2);
    for (int p = 0; p < o.n_provinces; ++p) {
        const double mean = location_mean(o, p, o.n_provinces);
        for (int y = o.first_year; y <= o.last_year; ++y) {
            const auto w = simulate(o, mean, p, y, 0, 0.0);
            weather::RegressorAccumulator acc(schema);
            for (std::size_t d = 0; d < w.day_mean.size(); ++d) {
                acc.add_day(std::span<const double>(&w.day_mean[d], 1));
                acc.add_precip(w.precip[d]);
            }
            const auto set = acc.finish(province_id(p, o.n_provinces), y);
            const auto v = set.values();
            std::copy(v.begin(), v.end(), values.begin());
            values[v.size()] = values[v.size() + 1] = std::numeric_limits<double>::quiet_NaN();
            data.add_row(set.province_id, y, region_id(p, o.n_regions), false, values);
            resp.push_back(response(o, set));
            precip.push_back(set.precip_linear);
        }
    }
    // Rows were added in province-year order, which finalize() keeps.
    data.finalize();
    add_outcomes(o, data, resp, precip);
    return data;
}

namespace {

weather::GridSet hourly_grid(const Options& o, const std::vector<double>& cell_means, int y0, int y1, std::uint64_t tag,
                             const std::function<double(int)>& shift) {
    weather::GridSet grids;
    for (std::size_t c = 0; c < cell_means.size(); ++c) {
        std::vector<weather::HourlyRecord> hours;
        std::vector<weather::DailyPrecip> days;
        for (int y = y0; y <= y1; ++y) {
            const auto w = simulate(o, cell_means[c], static_cast<int>(c), y, tag, shift(y));
            const auto dates = weather::dates_of_year(y);
            for (std::size_t d = 0; d < dates.size(); ++d) {
                for (int h = 0; h < 24; ++h) {
                    const double diurnal = o.diurnal_amplitude * std::sin(2.0 * std::numbers::pi * (h - 9) / 24.0);
                    hours.push_back({weather::Timestamp{dates[d]} + std::chrono::hours{h},
                                     round_to(w.day_mean[d] + diurnal, 0.01)});
                }
                days.push_back({dates[d], w.precip[d]});
            }
        }
        const auto id = c + 1 == cell_means.size() ? std::string("c_border") : fmt::format("c{:02d}", c + 1);
        grids.emplace(id, weather::GridHourlySeries(id, 30.0 + 0.5 * static_cast<double>(c), 110.0, std::move(hours),
                                                    std::move(days)));
    }
    return grids;
}

std::vector<weather::AnnualRegressorSet> aggregate_all(const weather::WeightMap& weights,
                                                       const std::vector<std::string>& provinces, int y0, int y1,
                                                       const weather::GridSet& grids,
                                                       const weather::RegressorSchema& schema) {
    std::vector<weather::ProvinceYear> req;
    for (const auto& p : provinces) {
        for (int y = y0; y <= y1; ++y) req.push_back({p, y});
    }
    return weather::aggregate(req, schema, grids, weights);
}

}  // namespace

void write_fixtures(const Options& o, const fs::path& dir) {
    fs::create_directories(dir / "climate");
    const int n = o.n_provinces;
    const auto schema = weather::RegressorSchema::defaults();

    std::vector<double> cell_means;
    for (int p = 0; p < n; ++p) cell_means.push_back(location_mean(o, p, n));
    cell_means.push_back(0.5 * (o.mean_temp_lo + o.mean_temp_hi));

    // Two polygons per province: one on its own cell, one straddling the
    // shared border cell. Populations shift in 2010.
    std::map<std::string, std::vector<weather::CellWeight>> cells;
    std::map<std::string, std::vector<weather::RawPopulation>> pops;
    std::vector<std::string> provinces;
    std::vector<ProvincePopulation> shares;
    for (int p = 0; p < n; ++p) {
        const auto prov = province_id(p, n);
        const auto own = fmt::format("c{:02d}", p + 1);
        provinces.push_back(prov);
        cells[prov + "_A"] = {{own, 1.0}};
        cells[prov + "_B"] = {{own, 0.6}, {"c_border", 0.4}};
        const double a = 1e6 * (1 + p % 3), b = 5e5 * (1 + p % 2);
        pops[prov] = {{prov + "_A", a, 1900, 2009}, {prov + "_B", b, 1900, 2009},
                      {prov + "_A", a, 2010, 2100}, {prov + "_B", 1.2 * b, 2010, 2100}};
        shares.push_back({prov, region_id(p, o.n_regions), a + 1.2 * b, 1.0});
    }
    const auto weights = weather::WeightMap::from_populations(cells, pops);
    weights.validate();
    io::write_cell_weights(dir / "weights_cells.csv", weights);
    io::write_polygon_weights(dir / "weights_polygons.csv", weights);

    const auto history = hourly_grid(o, cell_means, o.first_year, o.last_year, 0, [](int) { return 0.0; });
    io::write_grid_hourly(dir / "grid_hourly.csv", history);
    io::write_grid_daily(dir / "grid_daily.csv", history);

    const auto regs = aggregate_all(weights, provinces, o.first_year, o.last_year, history, schema);
    PanelDataset data(panel_columns(schema));
    std::vector<double> resp, precip;
    for (const auto& r : regs) {
        auto v = r.values();
        v.push_back(std::numeric_limits<double>::quiet_NaN());
        v.push_back(std::numeric_limits<double>::quiet_NaN());
        const int p = static_cast<int>(std::find(provinces.begin(), provinces.end(), r.province_id) - provinces.begin());
        data.add_row(r.province_id, r.year, region_id(p, o.n_regions), false, v);
        resp.push_back(response(o, r));
        precip.push_back(r.precip_linear);
    }
    data.finalize();
    add_outcomes(o, data, resp, precip);
    io::write_panel(dir / "panel.csv", data);

    const auto& income = data.column(std::string(schema::income));
    for (int p = 0; p < n; ++p) {
        const auto row = data.find_row(p, o.last_year);
        if (row) shares[static_cast<std::size_t>(p)].level_2022 = income[*row];
    }
    io::write_shares(dir / "shares.csv", PopulationShares(shares));

    const std::vector<std::pair<std::string, double>> rcps{{"rcp45", 0.02}, {"rcp85", 0.045}};
    for (int m = 0; m < o.n_models; ++m) {
        for (std::size_t r = 0; r < rcps.size(); ++r) {
            const double rate = rcps[r].second;
            const double offset = m * o.model_offset;
            const auto grid = hourly_grid(o, cell_means, o.projection_first_year, o.projection_last_year,
                                          100 + static_cast<std::uint64_t>(m) * 10 + r,
                                          [&](int y) { return offset + rate * std::max(0, y - 2015); });
            const auto proj =
                aggregate_all(weights, provinces, o.projection_first_year, o.projection_last_year, grid, schema);
            ClimateScenario scen(fmt::format("gcm{}", m + 1), rcps[r].first, schema.column_names());
            for (const auto& a : proj) scen.add(a.province_id, a.year, a.values());
            io::write_climate(dir / "climate" / fmt::format("{}_{}.csv", scen.model(), scen.rcp()), scen);
        }
    }

    std::vector<SspPath> paths{{"ssp3", {}}, {"ssp5", {}}};
    for (int y = 2015; y <= 2100; y += 5) {
        paths[0].points.emplace_back(y, 10000.0 * std::pow(1.015, y - 2015));
        paths[1].points.emplace_back(y, 10000.0 * std::pow(1.03, y - 2015));
    }
    io::write_growth_paths(dir / "growth.csv", paths);

    ModelSpec spec;
    spec.poly_order = 2;
    io::write_spec(dir / "spec.cfg", spec);

    csv::AtomicWriter cand(dir / "candidates.csv");
    cand.row({"lower_edge", "interval"});
    for (const auto& [lo, w] : std::vector<std::pair<int, int>>{{23, 5}, {24, 4}, {25, 3}, {22, 6}, {21, 7}}) {
        cand.row({std::to_string(lo), std::to_string(w)});
    }
    cand.commit();

    csv::AtomicWriter cfg(dir / "pipeline.cfg");
    cfg.stream() << "# paths are relative to this file\n"
                 << "grid=grid_hourly.csv,grid_daily.csv\n"
                 << "weights=weights_cells.csv,weights_polygons.csv\n"
                 << "panel=panel.csv\n"
                 << "spec=spec.cfg\n"
                 << "candidates=candidates.csv\n"
                 << "climate=climate\n"
                 << "growth=growth.csv\n"
                 << "shares=shares.csv\n"
                 << "output=out\n"
                 << "draws=20\n"
                 << "seed=" << o.seed << "\n";
    cfg.commit();
}

}  // namespace climpanel::synth
