#include "climpanel/io.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "climpanel/csv.hpp"
#include "climpanel/errors.hpp"
#include "climpanel/schema.hpp"

namespace climpanel::io {

using weather::Date;

namespace {

bool has(const csv::Reader& in, std::string_view name) { return in.find(name).has_value(); }

int parse_int(std::string_view s, std::size_t pos, std::size_t len, bool& ok) {
    int v = 0;
    if (pos + len > s.size()) {
        ok = false;
        return 0;
    }
    const auto r = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    ok = ok && r.ec == std::errc{} && r.ptr == s.data() + pos + len;
    return v;
}

std::optional<Date> parse_date(std::string_view s) {
    bool ok = s.size() >= 10 && s[4] == '-' && s[7] == '-';
    const int y = parse_int(s, 0, 4, ok), m = parse_int(s, 5, 2, ok), d = parse_int(s, 8, 2, ok);
    if (!ok) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return Date{ymd};
}

// YYYY-MM-DD[T ]HH:MM[:SS][Z]
std::optional<weather::Timestamp> parse_timestamp(std::string_view s) {
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    const auto date = parse_date(s);
    if (!date || s.size() < 16 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') return std::nullopt;
    bool ok = true;
    const int hh = parse_int(s, 11, 2, ok), mm = parse_int(s, 14, 2, ok);
    int ss = 0;
    if (s.size() > 16) {
        ok = ok && s.size() == 19 && s[16] == ':';
        ss = parse_int(s, 17, 2, ok);
    }
    if (!ok || hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    return weather::Timestamp{*date} + std::chrono::hours{hh} + std::chrono::minutes{mm} + std::chrono::seconds{ss};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

bool parse_bool(std::string_view v, const std::string& where) {
    if (v == "1" || v == "true" || v == "TRUE" || v == "True") return true;
    if (v == "0" || v == "false" || v == "FALSE" || v == "False") return false;
    fail(ErrorKind::invalid_data, fmt::format("{}: '{}' is not a boolean", where, v));
}

}  // namespace

weather::GridSet read_grid(std::span<const fs::path> files) {
    struct Cell {
        double lat = 0.0, lon = 0.0;
        std::vector<weather::HourlyRecord> hours;
        std::vector<weather::DailyPrecip> days;
    };
    std::map<std::string, Cell> cells;
    for (const auto& file : files) {
        csv::Reader in(file);
        const auto c_cell = in.require("cell_id");
        if (has(in, "timestamp")) {
            const auto c_lat = in.require("lat"), c_lon = in.require("lon");
            const auto c_time = in.require("timestamp"), c_temp = in.require("temp_c");
            while (in.next()) {
                auto& cell = cells[std::string(in.field(c_cell))];
                const auto t = parse_timestamp(in.field(c_time));
                if (!t) fail(ErrorKind::invalid_data, in.where() + ": malformed timestamp");
                const double temp = in.number(c_temp);
                if (!std::isfinite(temp) || temp < -90.0 || temp > 60.0) {
                    fail(ErrorKind::invalid_data, fmt::format("{}: temperature {} outside [-90, 60]", in.where(), temp));
                }
                cell.lat = in.number(c_lat);
                cell.lon = in.number(c_lon);
                cell.hours.push_back({*t, temp});
            }
        } else if (has(in, "precip_mm")) {
            const auto c_date = in.require("date"), c_p = in.require("precip_mm");
            while (in.next()) {
                const auto d = parse_date(in.field(c_date));
                if (!d) fail(ErrorKind::invalid_data, in.where() + ": malformed date");
                const double p = in.number(c_p);
                if (!(p >= 0.0)) fail(ErrorKind::invalid_data, fmt::format("{}: precipitation {} is negative or missing", in.where(), p));
                cells[std::string(in.field(c_cell))].days.push_back({*d, p});
            }
        } else {
            fail(ErrorKind::schema_violation, file.string() + ": neither an hourly nor a daily grid file");
        }
    }
    weather::GridSet out;
    for (auto& [id, c] : cells) {
        std::sort(c.hours.begin(), c.hours.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
        std::sort(c.days.begin(), c.days.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
        out.emplace(id, weather::GridHourlySeries(id, c.lat, c.lon, std::move(c.hours), std::move(c.days)));
    }
    return out;
}

namespace {

std::vector<std::string> sorted_cells(const weather::GridSet& grids) {
    std::vector<std::string> ids;
    for (const auto& [id, _] : grids) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace

void write_grid_hourly(const fs::path& path, const weather::GridSet& grids) {
    csv::AtomicWriter out(path);
    out.row({"cell_id", "lat", "lon", "timestamp", "temp_c"});
    for (const auto& id : sorted_cells(grids)) {
        const auto& g = grids.at(id);
        const auto span = g.temperature_span();
        if (!span) continue;
        const auto lat = csv::format_number(g.lat()), lon = csv::format_number(g.lon());
        for (Date d = span->first; d <= span->second; d += std::chrono::days{1}) {
            const auto temps = g.day_temperatures(d);
            if (temps.empty()) continue;
            const auto day = format_date(d);
            for (std::size_t h = 0; h < 24; ++h) {
                out.stream() << id << ',' << lat << ',' << lon << ',' << day << fmt::format("T{:02d}:00:00", h) << ','
                             << csv::format_number(temps[h]) << '\n';
            }
        }
    }
    out.commit();
}

void write_grid_daily(const fs::path& path, const weather::GridSet& grids) {
    csv::AtomicWriter out(path);
    out.row({"cell_id", "date", "precip_mm"});
    for (const auto& id : sorted_cells(grids)) {
        const auto& g = grids.at(id);
        const auto span = g.precipitation_span();
        if (!span) continue;
        for (Date d = span->first; d <= span->second; d += std::chrono::days{1}) {
            const double p = g.precipitation(d);
            if (std::isnan(p)) continue;
            out.stream() << id << ',' << format_date(d) << ',' << csv::format_number(p) << '\n';
        }
    }
    out.commit();
}

weather::WeightMap read_weights(std::span<const fs::path> files) {
    std::map<std::string, std::vector<weather::CellWeight>> cell_weights;
    std::map<std::string, std::vector<weather::PolygonWeight>> polygon_weights;
    std::map<std::string, std::vector<weather::RawPopulation>> populations;
    for (const auto& file : files) {
        csv::Reader in(file);
        if (has(in, "w_cj")) {
            const auto c_poly = in.require("polygon_id"), c_cell = in.require("cell_id"), c_w = in.require("w_cj");
            while (in.next()) {
                cell_weights[std::string(in.field(c_poly))].push_back({std::string(in.field(c_cell)), in.number(c_w)});
            }
        } else if (has(in, "province_id") && (has(in, "w_jp") || has(in, "population"))) {
            const auto c_prov = in.require("province_id"), c_poly = in.require("polygon_id");
            const auto c_from = in.find("year_from"), c_to = in.find("year_to");
            const auto c_w = in.find("w_jp");
            const auto c_pop = in.find("population");
            while (in.next()) {
                const int from = c_from ? static_cast<int>(in.integer(*c_from)) : INT_MIN;
                const int to = c_to ? static_cast<int>(in.integer(*c_to)) : INT_MAX;
                if (from > to) fail(ErrorKind::invalid_data, in.where() + ": year_from after year_to");
                const std::string prov(in.field(c_prov)), poly(in.field(c_poly));
                if (c_w) {
                    polygon_weights[prov].push_back({poly, in.number(*c_w), from, to});
                } else {
                    const double pop = in.number(*c_pop);
                    if (!(pop >= 0.0)) fail(ErrorKind::invalid_weights, in.where() + ": negative population");
                    populations[prov].push_back({poly, pop, from, to});
                }
            }
        } else {
            fail(ErrorKind::schema_violation, file.string() + ": neither a cell-weight nor a polygon-weight file");
        }
    }
    if (!populations.empty() && !polygon_weights.empty()) {
        fail(ErrorKind::schema_violation, "polygon weights mix normalized weights and raw populations");
    }
    weather::WeightMap map = populations.empty()
                                 ? weather::WeightMap(std::move(cell_weights), std::move(polygon_weights))
                                 : weather::WeightMap::from_populations(std::move(cell_weights), populations);
    map.validate();
    return map;
}

void write_cell_weights(const fs::path& path, const weather::WeightMap& weights) {
    csv::AtomicWriter out(path);
    out.row({"polygon_id", "cell_id", "w_cj"});
    for (const auto& [poly, cells] : weights.cell_weights()) {
        for (const auto& c : cells) out.row({poly, c.cell_id, csv::format_number(c.weight)});
    }
    out.commit();
}

void write_polygon_weights(const fs::path& path, const weather::WeightMap& weights) {
    csv::AtomicWriter out(path);
    out.row({"province_id", "polygon_id", "year_from", "year_to", "w_jp"});
    for (const auto& [prov, polys] : weights.population_weights()) {
        for (const auto& p : polys) {
            out.row({prov, p.polygon_id, std::to_string(p.year_from), std::to_string(p.year_to),
                     csv::format_number(p.weight)});
        }
    }
    out.commit();
}

void write_regressors(const fs::path& path, std::span<const weather::AnnualRegressorSet> rows,
                      const weather::RegressorSchema& schema) {
    csv::AtomicWriter out(path);
    std::vector<std::string> header{std::string(schema::province), std::string(schema::year)};
    for (const auto& c : schema.column_names()) header.push_back(c);
    out.row(header);
    for (const auto& r : rows) {
        out.stream() << r.province_id << ',' << r.year;
        for (double v : r.values()) out.stream() << ',' << csv::format_number(v);
        out.stream() << '\n';
    }
    out.commit();
}

PanelDataset read_panel(const fs::path& path, const std::string& income_column) {
    csv::Reader in(path);
    const auto c_prov = in.require(schema::province);
    const auto c_year = in.require(schema::year);
    const auto c_region = in.find(schema::region);
    const auto c_low = in.find(schema::low_income);
    std::vector<std::size_t> value_cols;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < in.header().size(); ++i) {
        if (i == c_prov || i == c_year || (c_region && i == *c_region) || (c_low && i == *c_low)) continue;
        value_cols.push_back(i);
        names.push_back(in.header()[i]);
    }
    PanelDataset data(names);
    std::set<std::pair<std::string, long>> seen;
    std::vector<double> values(names.size());
    while (in.next()) {
        const std::string prov(in.field(c_prov));
        const long year = in.integer(c_year);
        if (!seen.emplace(prov, year).second) {
            fail(ErrorKind::uniqueness_violation, fmt::format("{}: duplicate row for {} {}", in.where(), prov, year));
        }
        for (std::size_t k = 0; k < value_cols.size(); ++k) values[k] = in.number(value_cols[k]);
        const bool low = c_low ? parse_bool(in.field(*c_low), in.where()) : false;
        data.add_row(prov, static_cast<int>(year), c_region ? std::string(in.field(*c_region)) : std::string(), low,
                     values);
    }
    data.finalize();
    if (!c_low && data.has_column(income_column)) data.classify_low_income(income_column);
    return data;
}

void write_panel(const fs::path& path, const PanelDataset& data) {
    csv::AtomicWriter out(path);
    std::vector<std::string> header{std::string(schema::province), std::string(schema::year),
                                    std::string(schema::region), std::string(schema::low_income)};
    for (const auto& c : data.column_names()) header.push_back(c);
    out.row(header);
    std::vector<const std::vector<double>*> cols;
    for (const auto& c : data.column_names()) cols.push_back(&data.column(c));
    for (std::size_t r = 0; r < data.rows(); ++r) {
        out.stream() << data.province(r) << ',' << data.year(r) << ',' << data.region(r) << ','
                     << (data.low_income(r) ? 1 : 0);
        for (const auto* c : cols) out.stream() << ',' << csv::format_number((*c)[r]);
        out.stream() << '\n';
    }
    out.commit();
}

std::vector<ClimateScenario> read_climate_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) fail(ErrorKind::io_error, "climate directory " + dir.string() + " not found");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::map<std::pair<std::string, std::string>, ClimateScenario> scenarios;
    for (const auto& file : files) {
        csv::Reader in(file);
        const auto c_model = in.require("model"), c_rcp = in.require("rcp");
        const auto c_prov = in.require(schema::province), c_year = in.require(schema::year);
        std::vector<std::size_t> value_cols;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < in.header().size(); ++i) {
            if (i == c_model || i == c_rcp || i == c_prov || i == c_year) continue;
            value_cols.push_back(i);
            names.push_back(in.header()[i]);
        }
        while (in.next()) {
            const std::pair key{std::string(in.field(c_model)), std::string(in.field(c_rcp))};
            auto it = scenarios.find(key);
            if (it == scenarios.end()) it = scenarios.emplace(key, ClimateScenario(key.first, key.second, names)).first;
            if (it->second.columns() != names) {
                fail(ErrorKind::schema_violation, in.where() + ": columns differ from an earlier file of the same scenario");
            }
            std::vector<double> values(value_cols.size());
            for (std::size_t k = 0; k < value_cols.size(); ++k) values[k] = in.number(value_cols[k]);
            try {
                it->second.add(std::string(in.field(c_prov)), static_cast<int>(in.integer(c_year)), std::move(values));
            } catch (const Error& e) {
                fail(e.kind(), in.where() + ": " + e.detail());
            }
        }
    }
    if (scenarios.empty()) fail(ErrorKind::missing_data, "no climate scenarios in " + dir.string());
    std::vector<ClimateScenario> out;
    for (auto& [_, s] : scenarios) out.push_back(std::move(s));
    return out;
}

void write_climate(const fs::path& path, const ClimateScenario& climate) {
    csv::AtomicWriter out(path);
    std::vector<std::string> header{"model", "rcp", std::string(schema::province), std::string(schema::year)};
    for (const auto& c : climate.columns()) header.push_back(c);
    out.row(header);
    for (const auto& p : climate.provinces()) {
        for (int y = 1800; y <= 2300; ++y) {
            const auto* v = climate.find(p, y);
            if (!v) continue;
            out.stream() << climate.model() << ',' << climate.rcp() << ',' << p << ',' << y;
            for (double x : *v) out.stream() << ',' << csv::format_number(x);
            out.stream() << '\n';
        }
    }
    out.commit();
}

std::vector<SspPath> read_growth_paths(const fs::path& path) {
    csv::Reader in(path);
    const auto c_name = in.require("scenario"), c_year = in.require("year"), c_level = in.require("gdp_pc");
    std::map<std::string, SspPath> paths;
    while (in.next()) {
        auto& p = paths[std::string(in.field(c_name))];
        p.name = std::string(in.field(c_name));
        const double level = in.number(c_level);
        if (!(level > 0.0)) fail(ErrorKind::invalid_data, in.where() + ": GDP per capita must be positive");
        p.points.emplace_back(static_cast<int>(in.integer(c_year)), level);
    }
    std::vector<SspPath> out;
    for (auto& [_, p] : paths) {
        std::sort(p.points.begin(), p.points.end());
        for (std::size_t i = 1; i < p.points.size(); ++i) {
            if (p.points[i].first == p.points[i - 1].first) {
                fail(ErrorKind::uniqueness_violation, fmt::format("{}: year {} repeated in {}", path.string(),
                                                                  p.points[i].first, p.name));
            }
        }
        out.push_back(std::move(p));
    }
    return out;
}

void write_growth_paths(const fs::path& path, std::span<const SspPath> paths) {
    csv::AtomicWriter out(path);
    out.row({"scenario", "year", "gdp_pc"});
    for (const auto& p : paths) {
        for (const auto& [y, v] : p.points) out.row({p.name, std::to_string(y), csv::format_number(v)});
    }
    out.commit();
}

PopulationShares read_shares(const fs::path& path) {
    csv::Reader in(path);
    const auto c_prov = in.require(schema::province), c_region = in.require(schema::region);
    const auto c_pop = in.require("population");
    const auto c_level = in.find("level_2022");
    std::vector<ProvincePopulation> rows;
    while (in.next()) {
        ProvincePopulation p{std::string(in.field(c_prov)), std::string(in.field(c_region)), in.number(c_pop), 1.0};
        if (c_level) p.level_2022 = in.number(*c_level);
        rows.push_back(std::move(p));
    }
    return PopulationShares(std::move(rows));
}

void write_shares(const fs::path& path, const PopulationShares& shares) {
    csv::AtomicWriter out(path);
    out.row({std::string(schema::province), std::string(schema::region), "population", "level_2022"});
    for (const auto& p : shares.provinces()) {
        out.row({p.province, p.region, csv::format_number(p.population), csv::format_number(p.level_2022)});
    }
    out.commit();
}

std::vector<CandidateBinConfig> read_candidates(const fs::path& path) {
    csv::Reader in(path);
    const auto c_lo = in.require("lower_edge"), c_w = in.require("interval");
    std::vector<CandidateBinConfig> out;
    while (in.next()) out.push_back({in.number(c_lo), in.number(c_w)});
    if (out.empty()) fail(ErrorKind::config_error, path.string() + " lists no candidates");
    return out;
}

void write_cv_report(const fs::path& path, const CvReport& report) {
    csv::AtomicWriter out(path);
    out.row({"lower_edge", "interval", "rmse_oot", "rmse_oos", "oot_skipped", "selected"});
    for (std::size_t i = 0; i < report.scores.size(); ++i) {
        const auto& s = report.scores[i];
        out.row({csv::format_number(s.candidate.lower_edge), csv::format_number(s.candidate.interval),
                 csv::format_number(s.rmse_oot), csv::format_number(s.rmse_oos), std::to_string(s.oot_skipped),
                 i == report.winner ? "1" : "0"});
    }
    out.commit();
}

std::map<std::string, std::string> read_key_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::config_error, "cannot open " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    int line_no = 0;
    const auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::config_error, fmt::format("{}:{}: expected key=value", path.string(), line_no));
        const auto key = trim(line.substr(0, eq));
        if (!out.emplace(key, trim(line.substr(eq + 1))).second) {
            fail(ErrorKind::config_error, fmt::format("{}:{}: key '{}' repeated", path.string(), line_no, key));
        }
    }
    return out;
}

namespace {

template <typename E>
E parse_enum(const std::string& key, const std::string& value, std::initializer_list<std::pair<const char*, E>> options,
             const std::string& origin) {
    for (const auto& [name, e] : options) {
        if (value == name) return e;
    }
    fail(ErrorKind::config_error, fmt::format("{}: '{}' is not a valid {}", origin, value, key));
}

double parse_config_number(const std::string& key, const std::string& value, const std::string& origin) {
    const double v = csv::parse_double(value);
    if (!std::isfinite(v)) fail(ErrorKind::config_error, fmt::format("{}: {} needs a number, got '{}'", origin, key, value));
    return v;
}

int parse_config_int(const std::string& key, const std::string& value, const std::string& origin) {
    const double v = parse_config_number(key, value, origin);
    if (v != std::floor(v)) fail(ErrorKind::config_error, fmt::format("{}: {} needs an integer", origin, key));
    return static_cast<int>(v);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    for (auto part : csv::split(value)) {
        while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
        while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
        if (!part.empty()) out.emplace_back(part);
    }
    return out;
}

}  // namespace

ModelSpec parse_spec(const std::map<std::string, std::string>& entries, const std::string& origin) {
    ModelSpec s;
    for (const auto& [key, value] : entries) {
        if (key == "form") {
            s.form = parse_enum<Form>(key, value,
                                      {{"polynomial", Form::polynomial},
                                       {"bins", Form::bins},
                                       {"degree_days", Form::degree_days},
                                       {"interacted_average", Form::interacted_average}},
                                      origin);
        } else if (key == "poly_order") {
            s.poly_order = parse_config_int(key, value, origin);
        } else if (key == "bin_edges") {
            s.bin_edges.clear();
            for (const auto& e : split_list(value)) s.bin_edges.push_back(parse_config_number(key, e, origin));
        } else if (key == "omitted_bin") {
            s.omitted_bin = parse_config_int(key, value, origin);
        } else if (key == "precip_omitted_bin") {
            s.precip_omitted_bin = parse_config_int(key, value, origin);
        } else if (key == "hdd_threshold") {
            s.hdd_threshold = parse_config_number(key, value, origin);
        } else if (key == "cdd_threshold") {
            s.cdd_threshold = parse_config_number(key, value, origin);
        } else if (key == "income_kind") {
            s.income_kind = parse_enum<IncomeKind>(
                key, value, {{"none", IncomeKind::none}, {"level", IncomeKind::level}, {"log", IncomeKind::log}}, origin);
        } else if (key == "n_lags") {
            s.n_lags = parse_config_int(key, value, origin);
        } else if (key == "interaction") {
            s.interaction = parse_enum<Interaction>(
                key, value, {{"none", Interaction::none}, {"low_income", Interaction::low_income}}, origin);
        } else if (key == "fixed_effects") {
            s.fixed_effects = {false, false, false, false};
            for (const auto& fe : split_list(value)) {
                if (fe == "province") s.fixed_effects.province = true;
                else if (fe == "year") s.fixed_effects.year = true;
                else if (fe == "region_year") s.fixed_effects.region_year = true;
                else if (fe == "poor_year") s.fixed_effects.poor_year = true;
                else if (fe != "none") fail(ErrorKind::config_error, fmt::format("{}: unknown fixed effect '{}'", origin, fe));
            }
        } else if (key == "trend") {
            s.trend = parse_enum<Trend>(key, value,
                                        {{"none", Trend::none},
                                         {"quadratic_country", Trend::quadratic_country},
                                         {"quadratic_province", Trend::quadratic_province}},
                                        origin);
        } else if (key == "precip_control") {
            s.precip_control = parse_enum<PrecipControl>(
                key, value, {{"none", PrecipControl::none}, {"matched", PrecipControl::matched}}, origin);
        } else if (key == "lagged_dependent") {
            s.lagged_dependent = parse_enum<bool>(key, value, {{"true", true}, {"false", false}, {"1", true}, {"0", false}}, origin);
        } else if (key == "outcome") {
            s.outcome = value;
        } else if (key == "income_column") {
            s.income_column = value;
        } else {
            fail(ErrorKind::config_error, fmt::format("{}: unknown key '{}'", origin, key));
        }
    }
    try {
        s.validate();
    } catch (const Error& e) {
        fail(ErrorKind::config_error, origin + ": " + e.what());
    }
    return s;
}

ModelSpec read_spec(const fs::path& path) { return parse_spec(read_key_values(path), path.string()); }

namespace {

const char* name_of(IncomeKind k) {
    switch (k) {
        case IncomeKind::none: return "none";
        case IncomeKind::level: return "level";
        case IncomeKind::log: return "log";
    }
    return "none";
}

const char* name_of(Trend t) {
    switch (t) {
        case Trend::none: return "none";
        case Trend::quadratic_country: return "quadratic_country";
        case Trend::quadratic_province: return "quadratic_province";
    }
    return "none";
}

std::map<std::string, std::string> spec_entries(const ModelSpec& s) {
    std::vector<std::string> fe;
    if (s.fixed_effects.province) fe.emplace_back("province");
    if (s.fixed_effects.year) fe.emplace_back("year");
    if (s.fixed_effects.region_year) fe.emplace_back("region_year");
    if (s.fixed_effects.poor_year) fe.emplace_back("poor_year");
    if (fe.empty()) fe.emplace_back("none");
    std::vector<std::string> edges;
    for (double e : s.bin_edges) edges.push_back(csv::format_number(e));
    return {{"form", to_string(s.form)},
            {"poly_order", std::to_string(s.poly_order)},
            {"bin_edges", fmt::format("{}", fmt::join(edges, ","))},
            {"omitted_bin", std::to_string(s.omitted_bin)},
            {"precip_omitted_bin", std::to_string(s.precip_omitted_bin)},
            {"hdd_threshold", csv::format_number(s.hdd_threshold)},
            {"cdd_threshold", csv::format_number(s.cdd_threshold)},
            {"income_kind", name_of(s.income_kind)},
            {"n_lags", std::to_string(s.n_lags)},
            {"interaction", s.interaction == Interaction::low_income ? "low_income" : "none"},
            {"fixed_effects", fmt::format("{}", fmt::join(fe, ","))},
            {"trend", name_of(s.trend)},
            {"precip_control", s.precip_control == PrecipControl::matched ? "matched" : "none"},
            {"lagged_dependent", s.lagged_dependent ? "true" : "false"},
            {"outcome", s.outcome},
            {"income_column", s.income_column}};
}

}  // namespace

void write_spec(const fs::path& path, const ModelSpec& spec) {
    csv::AtomicWriter out(path);
    for (const auto& [k, v] : spec_entries(spec)) out.stream() << k << '=' << v << '\n';
    out.commit();
}

void write_fit_json(const fs::path& path, const FitResult& fit) {
    nlohmann::ordered_json j;
    j["spec"] = spec_entries(fit.spec);
    j["names"] = fit.names();
    std::vector<double> coef(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
    j["coefficients"] = coef;
    std::vector<double> se;
    std::vector<std::vector<double>> vcov;
    for (Eigen::Index i = 0; i < fit.vcov.rows(); ++i) {
        se.push_back(std::sqrt(std::max(0.0, fit.vcov(i, i))));
        std::vector<double> row;
        for (Eigen::Index k = 0; k < fit.vcov.cols(); ++k) row.push_back(fit.vcov(i, k));
        vcov.push_back(std::move(row));
    }
    j["std_errors"] = se;
    j["vcov"] = vcov;
    j["n_obs"] = fit.n_obs;
    j["n_clusters"] = fit.cluster_count;
    j["r2"] = fit.r2;
    j["within_r2"] = fit.within_r2;
    csv::AtomicWriter out(path);
    out.stream() << j.dump(2) << '\n';
    out.commit();
}

FitResult read_fit_json(const fs::path& path, const ModelSpec& spec, const std::vector<std::string>& columns) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io_error, "cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
        const auto names = j.at("names").get<std::vector<std::string>>();
        const auto coef = j.at("coefficients").get<std::vector<double>>();
        const auto vcov = j.at("vcov").get<std::vector<std::vector<double>>>();
        if (names.size() != coef.size() || vcov.size() != coef.size()) {
            fail(ErrorKind::schema_violation, path.string() + ": coefficient and vcov sizes disagree");
        }
        std::map<std::string, double> values;
        for (std::size_t i = 0; i < names.size(); ++i) values[names[i]] = coef[i];
        Eigen::MatrixXd v(static_cast<Eigen::Index>(coef.size()), static_cast<Eigen::Index>(coef.size()));
        for (std::size_t i = 0; i < vcov.size(); ++i) {
            if (vcov[i].size() != coef.size()) fail(ErrorKind::schema_violation, path.string() + ": vcov is not square");
            for (std::size_t k = 0; k < coef.size(); ++k) v(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = vcov[i][k];
        }
        auto fit = fixed_coefficients(spec, columns, values, v);
        if (fit.names() != names) fail(ErrorKind::schema_violation, path.string() + ": coefficients do not match the spec");
        fit.n_obs = j.value("n_obs", std::size_t{0});
        fit.r2 = j.value("r2", 0.0);
        fit.within_r2 = j.value("within_r2", 0.0);
        return fit;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::schema_violation, path.string() + ": " + e.what());
    }
}

}  // namespace climpanel::io
