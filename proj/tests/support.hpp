#pragma once

// Fixture builders and brute-force reference implementations shared by the
// unit and acceptance tests. The references deliberately avoid the library's
// code paths: explicit dummy regressors, scalar loops, plain sorting.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "climpanel/panel.hpp"
#include "climpanel/weather.hpp"

namespace testing_support {

using climpanel::weather::Date;

inline Date ymd(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}}};
}

// A cell whose hourly temperatures over `year` come from temp(day_index, hour)
// and whose daily precipitation comes from rain(day_index).
template <typename TempFn, typename RainFn>
climpanel::weather::GridHourlySeries make_cell(const std::string& id, int year, TempFn temp, RainFn rain) {
    std::vector<climpanel::weather::HourlyRecord> hours;
    std::vector<climpanel::weather::DailyPrecip> days;
    const auto dates = climpanel::weather::dates_of_year(year);
    for (std::size_t d = 0; d < dates.size(); ++d) {
        for (int h = 0; h < 24; ++h) {
            hours.push_back({climpanel::weather::Timestamp{dates[d]} + std::chrono::hours{h}, temp(d, h)});
        }
        days.push_back({dates[d], rain(d)});
    }
    return {id, 0.0, 0.0, std::move(hours), std::move(days)};
}

inline climpanel::weather::GridHourlySeries constant_cell(const std::string& id, int year, double temp,
                                                          double rain = 0.0) {
    return make_cell(id, year, [=](std::size_t, int) { return temp; }, [=](std::size_t) { return rain; });
}

// One province made of polygons, each polygon a list of (cell, weight).
struct PolygonSpec {
    std::string id;
    double weight;
    std::vector<std::pair<std::string, double>> cells;
};

inline climpanel::weather::WeightMap make_weights(
    const std::map<std::string, std::vector<PolygonSpec>>& provinces, int year_from = 1900, int year_to = 2100) {
    std::map<std::string, std::vector<climpanel::weather::CellWeight>> cw;
    std::map<std::string, std::vector<climpanel::weather::PolygonWeight>> pw;
    for (const auto& [prov, polys] : provinces) {
        for (const auto& poly : polys) {
            for (const auto& [cell, w] : poly.cells) cw[poly.id].push_back({cell, w});
            pw[prov].push_back({poly.id, poly.weight, year_from, year_to});
        }
    }
    return {cw, pw};
}

// Flat loop over polygons, cells and hours of every day, computing every
// regressor directly from its definition.
struct BruteRegressors {
    std::vector<double> poly;
    std::vector<double> bins;
    double hdd = 0.0, cdd = 0.0;
    double p_lin = 0.0, p_sq = 0.0;
    std::vector<double> pbins;
};

inline BruteRegressors brute_force(const std::string& province, int year, const climpanel::weather::GridSet& grids,
                                   const climpanel::weather::WeightMap& weights, int order,
                                   const std::vector<double>& tedges, double hdd_thr, double cdd_thr,
                                   const std::vector<double>& pedges) {
    BruteRegressors r;
    r.poly.assign(static_cast<std::size_t>(order), 0.0);
    r.bins.assign(tedges.size() + 1, 0.0);
    r.pbins.assign(pedges.size() + 1, 0.0);
    for (const auto& poly : weights.polygons_for(province, year)) {
        for (const auto& cell : weights.cells_of(poly.polygon_id)) {
            const double w = poly.weight * cell.weight;
            const auto& g = grids.at(cell.cell_id);
            for (const auto d : climpanel::weather::dates_of_year(year)) {
                const auto temps = g.day_temperatures(d);
                for (int h = 0; h < 24; ++h) {
                    const double t = temps[static_cast<std::size_t>(h)];
                    for (int m = 1; m <= order; ++m) r.poly[static_cast<std::size_t>(m - 1)] += w * std::pow(t, m) / 24.0;
                    std::size_t b = 0;
                    while (b < tedges.size() && t >= tedges[b]) ++b;
                    r.bins[b] += w / 24.0;
                    if (t < hdd_thr) r.hdd += w * (hdd_thr - t) / 24.0;
                    if (t > cdd_thr) r.cdd += w * (t - cdd_thr) / 24.0;
                }
                const double p = g.precipitation(d);
                r.p_lin += w * p;
                r.p_sq += w * p * p;
                std::size_t b = 0;
                while (b < pedges.size() && p > pedges[b]) ++b;
                r.pbins[b] += w;
            }
        }
    }
    return r;
}

// OLS of y on [X, province dummies, year dummies minus the first]; returns
// the coefficients on X.
inline Eigen::VectorXd dummy_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<int>& province,
                                 const std::vector<int>& year) {
    const int np = *std::max_element(province.begin(), province.end()) + 1;
    const int ny = *std::max_element(year.begin(), year.end()) + 1;
    const auto n = x.rows();
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, x.cols() + np + ny - 1);
    full.leftCols(x.cols()) = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        full(i, x.cols() + province[static_cast<std::size_t>(i)]) = 1.0;
        const int yr = year[static_cast<std::size_t>(i)];
        if (yr > 0) full(i, x.cols() + np + yr - 1) = 1.0;
    }
    const Eigen::VectorXd beta = full.colPivHouseholderQr().solve(y);
    return beta.head(x.cols());
}

// (X'X)^-1 meat (X'X)^-1 with the meat summed cluster by cluster in scalar loops.
inline Eigen::MatrixXd naive_sandwich(const Eigen::MatrixXd& x, const Eigen::VectorXd& e, const std::vector<int>& cl,
                                      int n_params) {
    const auto n = x.rows();
    const auto k = x.cols();
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b) xtx(a, b) += x(i, a) * x(i, b);
    const Eigen::MatrixXd bread = xtx.inverse();
    std::map<int, std::vector<double>> score;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto& s = score[cl[static_cast<std::size_t>(i)]];
        s.resize(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index a = 0; a < k; ++a) s[static_cast<std::size_t>(a)] += x(i, a) * e[i];
    }
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [_, s] : score)
        for (Eigen::Index a = 0; a < k; ++a)
            for (Eigen::Index b = 0; b < k; ++b) meat(a, b) += s[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(b)];
    const double g = static_cast<double>(score.size());
    const double factor = g / (g - 1.0) * (static_cast<double>(n) - 1.0) / (static_cast<double>(n) - n_params);
    return factor * bread * meat * bread;
}

// Type-7 percentile from its textbook definition on a sorted copy.
inline double sorted_percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = 1.0 + (static_cast<double>(v.size()) - 1.0) * q / 100.0;  // 1-based
    const auto j = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(j);
    if (j >= v.size()) return v.back();
    return v[j - 1] + frac * (v[j] - v[j - 1]);
}

// Random panel with regressors temp_p1, temp_p2 and outcome
// growth = b1 temp_p1 + b2 temp_p2 + FE + noise. Rows are dropped with
// probability `drop` to make it unbalanced.
inline climpanel::PanelDataset random_panel(std::mt19937_64& rng, int n_prov, int n_year, double b1, double b2,
                                            double noise = 1.0, double drop = 0.0) {
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    climpanel::PanelDataset data({"temp_p1", "temp_p2", "growth"});
    std::vector<double> ap(static_cast<std::size_t>(n_prov)), ay(static_cast<std::size_t>(n_year));
    for (auto& a : ap) a = 2.0 * z(rng);
    for (auto& a : ay) a = z(rng);
    for (int p = 0; p < n_prov; ++p) {
        for (int t = 0; t < n_year; ++t) {
            const double x1 = z(rng) + 0.3 * ap[static_cast<std::size_t>(p)];
            const double x2 = z(rng) + 0.5 * ay[static_cast<std::size_t>(t)];
            const double y = b1 * x1 + b2 * x2 + ap[static_cast<std::size_t>(p)] + ay[static_cast<std::size_t>(t)] +
                             noise * z(rng);
            if (t > 1 && u(rng) < drop) continue;
            data.add_row("p" + std::to_string(p), 2000 + t, "r", false, {x1, x2, y});
        }
    }
    data.finalize();
    return data;
}

}  // namespace testing_support
