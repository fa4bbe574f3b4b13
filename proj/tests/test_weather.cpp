#include <doctest.h>

#include <random>

#include "climpanel/errors.hpp"
#include "climpanel/weather.hpp"
#include "support.hpp"

using namespace climpanel;
using namespace climpanel::weather;
using testing_support::brute_force;
using testing_support::constant_cell;
using testing_support::make_cell;
using testing_support::make_weights;
using testing_support::ymd;

namespace {

const std::vector<double> coarse_edges{13, 18, 23, 28, 33, 38};
const std::vector<double> precip_edges{0, 10, 20, 30, 40};

GridSet single(const GridHourlySeries& cell) {
    GridSet g;
    g.emplace(cell.cell_id(), cell);
    return g;
}

WeightMap one_cell_province() { return make_weights({{"P", {{"J", 1.0, {{"c", 1.0}}}}}}); }

// Three cells of random hourly weather feeding two polygons with uneven weights.
struct RandomField {
    GridSet grids;
    WeightMap weights;
    int year;

    RandomField(std::uint64_t seed, int y) : year(y) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> z;
        std::uniform_real_distribution<double> u;
        for (const char* id : {"a", "b", "c"}) {
            const double base = 15.0 + 15.0 * u(rng);
            std::vector<double> t, p;
            const int n_days = days_in_year(y);
            for (int i = 0; i < n_days * 24; ++i) t.push_back(std::round((base + 6.0 * z(rng)) * 100.0) / 100.0);
            for (int i = 0; i < n_days; ++i) p.push_back(u(rng) < 0.4 ? std::round(60.0 * u(rng) * 10.0) / 10.0 : 0.0);
            grids.emplace(id, make_cell(
                                  id, y, [t](std::size_t d, int h) { return t[d * 24 + static_cast<std::size_t>(h)]; },
                                  [p](std::size_t d) { return p[d]; }));
        }
        weights = make_weights({{"P", {{"J1", 0.3, {{"a", 0.7}, {"b", 0.3}}}, {"J2", 0.7, {{"b", 0.2}, {"c", 0.8}}}}}});
    }
};

}  // namespace

TEST_CASE("daily mean temperature of constant and symmetric fields") {
    const auto grids = single(constant_cell("c", 2021, 26.0));
    CHECK(daily_mean_temperature("P", ymd(2021, 3, 1), grids, one_cell_province()) == doctest::Approx(26.0).epsilon(1e-15));

    GridSet two;
    two.emplace("x", constant_cell("x", 2021, 20.0));
    two.emplace("y", constant_cell("y", 2021, 30.0));
    const auto w = make_weights({{"P", {{"J1", 0.5, {{"x", 1.0}}}, {"J2", 0.5, {{"y", 1.0}}}}}});
    CHECK(daily_mean_temperature("P", ymd(2021, 7, 4), two, w) == doctest::Approx(25.0).epsilon(1e-15));
}

TEST_CASE("daily mean temperature matches a flat loop over polygons, cells and hours") {
    const RandomField f(11, 2021);
    for (const auto d : {ymd(2021, 1, 1), ymd(2021, 6, 30), ymd(2021, 12, 31)}) {
        double expected = 0.0;
        for (const auto& poly : f.weights.polygons_for("P", 2021)) {
            for (const auto& cell : f.weights.cells_of(poly.polygon_id)) {
                const auto temps = f.grids.at(cell.cell_id).day_temperatures(d);
                for (double t : temps) expected += poly.weight * cell.weight * t / 24.0;
            }
        }
        CHECK(std::abs(daily_mean_temperature("P", d, f.grids, f.weights) - expected) < 1e-9);
    }
}

TEST_CASE("polynomial regressors") {
    SUBCASE("constant 26 C over a 365-day year") {
        const auto terms = annual_polynomial_regressors("P", 2021, 2, single(constant_cell("c", 2021, 26.0)),
                                                        one_cell_province());
        REQUIRE(terms.size() == 2);
        CHECK(terms[0] == doctest::Approx(9490.0).epsilon(1e-14));
        CHECK(terms[1] == doctest::Approx(246740.0).epsilon(1e-14));
    }
    SUBCASE("second power averages squares, not the square of the mean") {
        const auto cell = make_cell("c", 2021, [](std::size_t, int h) { return h % 2 ? 30.0 : 20.0; },
                                    [](std::size_t) { return 0.0; });
        const auto terms = annual_polynomial_regressors("P", 2021, 2, single(cell), one_cell_province());
        CHECK(terms[1] == doctest::Approx(650.0 * 365).epsilon(1e-14));
        CHECK(terms[1] > 25.0 * 25.0 * 365);
    }
    SUBCASE("random field, order 3") {
        const RandomField f(3, 2021);
        const auto terms = annual_polynomial_regressors("P", 2021, 3, f.grids, f.weights);
        const auto ref = brute_force("P", 2021, f.grids, f.weights, 3, coarse_edges, 23, 28, precip_edges);
        for (std::size_t m = 0; m < 3; ++m) CHECK(std::abs(terms[m] - ref.poly[m]) <= 1e-9 * std::abs(ref.poly[m]));
    }
}

TEST_CASE("temperature bin days") {
    SUBCASE("constant 26 C falls in [23, 28)") {
        const auto bins = annual_bin_days("P", 2021, coarse_edges, single(constant_cell("c", 2021, 26.0)),
                                          one_cell_province());
        REQUIRE(bins.size() == 7);
        for (std::size_t b = 0; b < bins.size(); ++b) CHECK(bins[b] == (b == 3 ? 365.0 : 0.0));
    }
    SUBCASE("hour fractions split a day") {
        const auto cell = make_cell("c", 2021,
                                    [](std::size_t d, int h) { return d == 0 ? (h < 12 ? 27.0 : 29.0) : 0.0; },
                                    [](std::size_t) { return 0.0; });
        const auto bins = annual_bin_days("P", 2021, coarse_edges, single(cell), one_cell_province());
        CHECK(bins[3] == doctest::Approx(0.5));
        CHECK(bins[4] == doctest::Approx(0.5));
        CHECK(bins[0] == doctest::Approx(364.0));
    }
    SUBCASE("edges are half-open: 23.0 belongs to [23, 28)") {
        const auto bins = annual_bin_days("P", 2021, coarse_edges, single(constant_cell("c", 2021, 23.0)),
                                          one_cell_province());
        CHECK(bins[3] == 365.0);
    }
    SUBCASE("random field matches hour counting and partitions the year") {
        for (int year : {2020, 2021}) {
            const RandomField f(5 + static_cast<std::uint64_t>(year), year);
            const auto bins = annual_bin_days("P", year, coarse_edges, f.grids, f.weights);
            const auto ref = brute_force("P", year, f.grids, f.weights, 1, coarse_edges, 23, 28, precip_edges);
            double total = 0.0;
            for (std::size_t b = 0; b < bins.size(); ++b) {
                CHECK(std::abs(bins[b] - ref.bins[b]) < 1e-9);
                total += bins[b];
            }
            CHECK(std::abs(total - days_in_year(year)) < 1e-9);
        }
    }
    SUBCASE("invalid edges") {
        const std::vector<double> bad{13, 13, 18};
        CHECK_THROWS_AS(annual_bin_days("P", 2021, bad, single(constant_cell("c", 2021, 26.0)), one_cell_province()),
                        Error);
    }
}

TEST_CASE("degree days") {
    const auto w = one_cell_province();
    CHECK(annual_degree_days("P", 2021, 23, 28, single(constant_cell("c", 2021, 26.0)), w).cdd == 0.0);
    CHECK(annual_degree_days("P", 2021, 23, 28, single(constant_cell("c", 2021, 26.0)), w).hdd == 0.0);

    const auto hot_day = make_cell("c", 2021, [](std::size_t d, int) { return d == 100 ? 35.0 : 26.0; },
                                   [](std::size_t) { return 0.0; });
    const auto dd = annual_degree_days("P", 2021, 23, 28, single(hot_day), w);
    CHECK(dd.cdd == 7.0);
    CHECK(dd.hdd == 0.0);

    const RandomField f(9, 2021);
    const auto mixed = annual_degree_days("P", 2021, 23, 28, f.grids, f.weights);
    const auto ref = brute_force("P", 2021, f.grids, f.weights, 1, coarse_edges, 23, 28, precip_edges);
    CHECK(std::abs(mixed.hdd - ref.hdd) < 1e-9);
    CHECK(std::abs(mixed.cdd - ref.cdd) < 1e-9);

    CHECK_THROWS_AS(annual_degree_days("P", 2021, 29, 28, single(hot_day), w), Error);
}

TEST_CASE("precipitation regressors") {
    const auto w = one_cell_province();
    SUBCASE("dry year") {
        const auto r = annual_precip_regressors("P", 2021, precip_edges, single(constant_cell("c", 2021, 20.0, 0.0)), w);
        CHECK(r.linear == 0.0);
        CHECK(r.squared == 0.0);
        CHECK(r.bin_days.front() == 365.0);
    }
    SUBCASE("one 45 mm day") {
        const auto cell = make_cell("c", 2021, [](std::size_t, int) { return 20.0; },
                                    [](std::size_t d) { return d == 10 ? 45.0 : 0.0; });
        const auto r = annual_precip_regressors("P", 2021, precip_edges, single(cell), w);
        CHECK(r.bin_days.back() == 1.0);
        CHECK(r.bin_days.front() == 364.0);
        CHECK(r.linear == 45.0);
        CHECK(r.squared == 45.0 * 45.0);
    }
    SUBCASE("right-closed bins: 10 mm is in (0, 10]") {
        const auto r = annual_precip_regressors("P", 2021, precip_edges, single(constant_cell("c", 2021, 20.0, 10.0)), w);
        CHECK(r.bin_days[1] == 365.0);
    }
    SUBCASE("random rainfall") {
        const RandomField f(21, 2021);
        const auto r = annual_precip_regressors("P", 2021, precip_edges, f.grids, f.weights);
        const auto ref = brute_force("P", 2021, f.grids, f.weights, 1, coarse_edges, 23, 28, precip_edges);
        CHECK(std::abs(r.linear - ref.p_lin) < 1e-9 * std::max(1.0, ref.p_lin));
        CHECK(std::abs(r.squared - ref.p_sq) < 1e-9 * std::max(1.0, ref.p_sq));
        for (std::size_t b = 0; b < r.bin_days.size(); ++b) CHECK(std::abs(r.bin_days[b] - ref.pbins[b]) < 1e-9);
    }
}

TEST_CASE("single-pass regressors agree with the individual operations") {
    const RandomField f(77, 2020);
    auto schema = RegressorSchema::defaults();
    const auto all = annual_regressors("P", 2020, schema, f.grids, f.weights);
    const auto poly = annual_polynomial_regressors("P", 2020, 7, f.grids, f.weights);
    const auto bins = annual_bin_days("P", 2020, schema.temp_bin_edges, f.grids, f.weights);
    const auto dd = annual_degree_days("P", 2020, 23, 28, f.grids, f.weights);
    const auto pr = annual_precip_regressors("P", 2020, schema.precip_bin_edges, f.grids, f.weights);
    for (std::size_t m = 0; m < poly.size(); ++m) CHECK(std::abs(all.poly_terms[m] - poly[m]) <= 1e-12 * std::abs(poly[m]));
    for (std::size_t b = 0; b < bins.size(); ++b) CHECK(std::abs(all.bin_days[b] - bins[b]) < 1e-9);
    CHECK(std::abs(all.degree_days[0].cdd - dd.cdd) < 1e-9);
    CHECK(std::abs(all.precip_linear - pr.linear) < 1e-9);
    CHECK(all.values().size() == schema.column_names().size());
}

TEST_CASE("parallel aggregation equals the serial reference bit for bit") {
    const RandomField f(4, 2021);
    const auto schema = RegressorSchema::defaults();
    std::vector<ProvinceYear> req(8, {"P", 2021});
    const auto a = aggregate(req, schema, f.grids, f.weights);
    const auto b = serial::aggregate(req, schema, f.grids, f.weights);
    for (std::size_t i = 0; i < req.size(); ++i) CHECK(a[i].values() == b[i].values());
}

TEST_CASE("splitting a polygon into two identical halves leaves regressors unchanged") {
    const RandomField f(8, 2021);
    const auto split = make_weights({{"P",
                                      {{"J1a", 0.15, {{"a", 0.7}, {"b", 0.3}}},
                                       {"J1b", 0.15, {{"a", 0.7}, {"b", 0.3}}},
                                       {"J2", 0.7, {{"b", 0.2}, {"c", 0.8}}}}}});
    const auto schema = RegressorSchema::defaults();
    const auto a = annual_regressors("P", 2021, schema, f.grids, f.weights).values();
    const auto b = annual_regressors("P", 2021, schema, f.grids, split).values();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9 * std::max(1.0, std::abs(a[i])));
}

TEST_CASE("weights validation and lookup") {
    SUBCASE("polygon weights summing to 0.9 name the province") {
        const auto w = make_weights({{"P7", {{"J1", 0.5, {{"c", 1.0}}}, {"J2", 0.4, {{"c", 1.0}}}}}});
        try {
            w.validate();
            FAIL("expected InvalidWeights");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::invalid_weights);
            CHECK(std::string(e.what()).find("P7") != std::string::npos);
        }
    }
    SUBCASE("cell weights summing to 0.9 name the polygon") {
        const auto w = make_weights({{"P", {{"poly42", 1.0, {{"a", 0.5}, {"b", 0.4}}}}}});
        try {
            w.validate();
            FAIL("expected InvalidWeights");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::invalid_weights);
            CHECK(std::string(e.what()).find("poly42") != std::string::npos);
        }
    }
    SUBCASE("raw populations are normalized per province and year range") {
        std::map<std::string, std::vector<CellWeight>> cells{{"A", {{"c", 1.0}}}, {"B", {{"c", 1.0}}}};
        std::map<std::string, std::vector<RawPopulation>> pops{
            {"P", {{"A", 300, 2000, 2009}, {"B", 100, 2000, 2009}, {"A", 100, 2010, 2020}, {"B", 100, 2010, 2020}}}};
        const auto w = WeightMap::from_populations(cells, pops);
        w.validate();
        const auto early = w.polygons_for("P", 2005);
        REQUIRE(early.size() == 2);
        CHECK(early[0].weight + early[1].weight == doctest::Approx(1.0));
        CHECK(std::max(early[0].weight, early[1].weight) == doctest::Approx(0.75));
        CHECK(w.polygons_for("P", 2015)[0].weight == doctest::Approx(0.5));
        // Years before the first range reuse it.
        CHECK(w.polygons_for("P", 1990)[0].weight == early[0].weight);
    }
}

TEST_CASE("missing and malformed weather") {
    SUBCASE("cell referenced by weights but absent from the grid") {
        GridSet g;
        g.emplace("other", constant_cell("other", 2021, 20.0));
        try {
            annual_regressors("P", 2021, RegressorSchema::defaults(), g, one_cell_province());
            FAIL("expected MissingData");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::missing_data);
        }
    }
    SUBCASE("a year the cell does not cover") {
        CHECK_THROWS_AS(annual_polynomial_regressors("P", 2022, 2, single(constant_cell("c", 2021, 20.0)),
                                                     one_cell_province()),
                        Error);
    }
    SUBCASE("a day with 23 hours is rejected") {
        std::vector<HourlyRecord> hours;
        for (int h = 0; h < 23; ++h) hours.push_back({Timestamp{ymd(2021, 1, 1)} + std::chrono::hours{h}, 10.0});
        CHECK_THROWS_AS(GridHourlySeries("c", 0, 0, hours, {}), Error);
    }
    SUBCASE("temperatures outside [-90, 60] and negative rain are rejected") {
        std::vector<HourlyRecord> hours;
        for (int h = 0; h < 24; ++h) hours.push_back({Timestamp{ymd(2021, 1, 1)} + std::chrono::hours{h}, h ? 10.0 : 75.0});
        CHECK_THROWS_AS(GridHourlySeries("c", 0, 0, hours, {}), Error);
        CHECK_THROWS_AS(GridHourlySeries("c", 0, 0, {}, {{ymd(2021, 1, 1), -1.0}}), Error);
    }
    SUBCASE("covered years") {
        GridSet g;
        g.emplace("c", constant_cell("c", 2021, 20.0));
        CHECK(covered_years("P", g, one_cell_province()) == std::vector<int>{2021});
    }
}
