// Serial reference vs OpenMP kernels on the same inputs. Thread count follows
// OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "climpanel/demean.hpp"
#include "climpanel/estimator.hpp"
#include "climpanel/projection.hpp"
#include "climpanel/synthetic.hpp"
#include "climpanel/weather.hpp"

using namespace climpanel;

namespace {

struct WeatherInputs {
    weather::GridSet grids;
    weather::WeightMap weights;
    std::vector<weather::ProvinceYear> requests;
};

// 12 provinces, each one polygon over two of 13 cells, 2001-2010.
const WeatherInputs& weather_inputs() {
    static const WeatherInputs in = [] {
        WeatherInputs w;
        std::mt19937_64 rng(1);
        std::normal_distribution<double> z;
        std::map<std::string, std::vector<weather::CellWeight>> cells;
        std::map<std::string, std::vector<weather::PolygonWeight>> polys;
        for (int c = 0; c < 13; ++c) {
            const auto id = "c" + std::to_string(c);
            std::vector<weather::HourlyRecord> hours;
            std::vector<weather::DailyPrecip> days;
            for (int y = 2001; y <= 2010; ++y) {
                for (const auto d : weather::dates_of_year(y)) {
                    const double mean = 18.0 + 0.5 * c + 2.5 * z(rng);
                    for (int h = 0; h < 24; ++h)
                        hours.push_back({weather::Timestamp{d} + std::chrono::hours{h},
                                         mean + 4.0 * std::sin(2.0 * std::numbers::pi * (h - 9) / 24.0)});
                    days.push_back({d, std::max(0.0, 6.0 * z(rng))});
                }
            }
            w.grids.emplace(id, weather::GridHourlySeries(id, 30.0, 110.0, std::move(hours), std::move(days)));
        }
        for (int p = 0; p < 12; ++p) {
            const auto prov = "P" + std::to_string(p);
            cells[prov + "_J"] = {{"c" + std::to_string(p), 0.7}, {"c" + std::to_string(p + 1), 0.3}};
            polys[prov] = {{prov + "_J", 1.0, 1900, 2100}};
            for (int y = 2001; y <= 2010; ++y) w.requests.push_back({prov, y});
        }
        w.weights = weather::WeightMap(cells, polys);
        return w;
    }();
    return in;
}

void BM_aggregate_serial(benchmark::State& state) {
    const auto& in = weather_inputs();
    const auto schema = weather::RegressorSchema::defaults();
    for (auto _ : state) benchmark::DoNotOptimize(weather::serial::aggregate(in.requests, schema, in.grids, in.weights));
}

void BM_aggregate_omp(benchmark::State& state) {
    const auto& in = weather_inputs();
    const auto schema = weather::RegressorSchema::defaults();
    for (auto _ : state) benchmark::DoNotOptimize(weather::aggregate(in.requests, schema, in.grids, in.weights));
}

struct DemeanInputs {
    Eigen::MatrixXd data;
    std::vector<FactorCodes> factors;
};

// 77 provinces x 41 years, 30 columns, about 10% of rows dropped.
const DemeanInputs& demean_inputs() {
    static const DemeanInputs in = [] {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u;
        std::vector<long> prov, year;
        for (long p = 0; p < 77; ++p)
            for (long y = 0; y < 41; ++y)
                if (u(rng) > 0.1) {
                    prov.push_back(p);
                    year.push_back(y);
                }
        DemeanInputs d;
        d.data = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(prov.size()), 30);
        d.factors = {make_factor(prov), make_factor(year)};
        return d;
    }();
    return in;
}

void BM_absorb_serial(benchmark::State& state) {
    const auto& in = demean_inputs();
    for (auto _ : state) benchmark::DoNotOptimize(serial::absorb_fixed_effects(in.data, in.factors));
}

void BM_absorb_omp(benchmark::State& state) {
    const auto& in = demean_inputs();
    for (auto _ : state) benchmark::DoNotOptimize(absorb_fixed_effects(in.data, in.factors));
}

const PanelDataset& bootstrap_panel() {
    static const PanelDataset data = [] {
        synth::Options o;
        o.n_provinces = 77;
        o.first_year = 1982;
        return synth::panel(o);
    }();
    return data;
}

BootstrapOptions bootstrap_options() {
    BootstrapOptions b;
    b.n_draws = 50;
    b.seed = 3;
    return b;
}

void BM_bootstrap_serial(benchmark::State& state) {
    const auto& data = bootstrap_panel();
    for (auto _ : state) benchmark::DoNotOptimize(serial::block_bootstrap(data, ModelSpec{}, bootstrap_options()));
}

void BM_bootstrap_omp(benchmark::State& state) {
    const auto& data = bootstrap_panel();
    for (auto _ : state) benchmark::DoNotOptimize(block_bootstrap(data, ModelSpec{}, bootstrap_options()));
}

}  // namespace

BENCHMARK(BM_aggregate_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_aggregate_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_absorb_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_absorb_omp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_bootstrap_omp)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
