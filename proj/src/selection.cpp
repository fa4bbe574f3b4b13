#include "climpanel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "climpanel/errors.hpp"
#include "climpanel/parallel.hpp"

namespace climpanel {

namespace {

FitOptions cv_fit_options() {
    FitOptions o;
    o.compute_vcov = false;
    return o;
}

// Estimated effect per raw key of every factor, plus each factor's mean effect.
struct FactorEffects {
    std::vector<std::map<long, double>> by_key;
    std::vector<double> mean;

    double value(std::size_t f, long key, bool& seen) const {
        const auto it = by_key[f].find(key);
        seen = it != by_key[f].end();
        return seen ? it->second : mean[f];
    }
};

FactorEffects estimate_effects(const Design& train, const FitResult& fit) {
    const Eigen::VectorXd raw = train.y - train.x * fit.coefficients;
    const auto factors = train.factors();
    const auto effects = recover_effects(raw, factors);
    FactorEffects out;
    out.by_key.resize(factors.size());
    out.mean.assign(factors.size(), 0.0);
    for (std::size_t f = 0; f < factors.size(); ++f) {
        for (std::size_t i = 0; i < train.factor_keys[f].size(); ++i) {
            out.by_key[f][train.factor_keys[f][i]] = effects[f][static_cast<std::size_t>(factors[f].codes[i])];
        }
        double sum = 0.0;
        for (double e : effects[f]) sum += e;
        out.mean[f] = effects[f].empty() ? 0.0 : sum / static_cast<double>(effects[f].size());
    }
    return out;
}

std::ptrdiff_t factor_index(const Design& d, const char* name) {
    const auto it = std::find(d.factor_names.begin(), d.factor_names.end(), name);
    return it == d.factor_names.end() ? -1 : it - d.factor_names.begin();
}

}  // namespace

ModelSpec candidate_spec(const CandidateBinConfig& candidate, const SelectionOptions& options) {
    const double lo = candidate.lower_edge;
    const double w = candidate.interval;
    if (!(w > 0.0)) fail(ErrorKind::invalid_bins, "candidate interval must be positive");
    if (!(lo <= options.pivot && options.pivot < lo + w)) {
        fail(ErrorKind::invalid_bins, fmt::format("candidate [{}, {}) does not contain the pivot {}", lo, lo + w,
                                                  options.pivot));
    }
    constexpr double eps = 1e-9;
    const auto k_min = static_cast<long>(std::ceil((options.edge_min - lo) / w - eps));
    const auto k_max = static_cast<long>(std::floor((options.edge_max - lo) / w + eps));
    if (k_min > 0 || k_max < 1) fail(ErrorKind::invalid_bins, "candidate omitted bin falls outside the edge range");
    ModelSpec spec = options.base;
    spec.form = Form::bins;
    spec.bin_edges.clear();
    for (long k = k_min; k <= k_max; ++k) spec.bin_edges.push_back(lo + static_cast<double>(k) * w);
    spec.omitted_bin = static_cast<int>(-k_min) + 1;
    return spec;
}

RmseResult oot_rmse(const CandidateBinConfig& candidate, const PanelDataset& data, const SelectionOptions& options) {
    const auto spec = candidate_spec(candidate, options);
    const auto design = build_design(spec, data);
    std::vector<bool> train(design.years.size()), test(design.years.size());
    for (std::size_t i = 0; i < design.years.size(); ++i) {
        train[i] = design.years[i] <= options.split_year;
        test[i] = !train[i];
    }
    if (std::count(train.begin(), train.end(), true) == 0 || std::count(test.begin(), test.end(), true) == 0) {
        fail(ErrorKind::too_few_observations, fmt::format("split at {} leaves an empty period", options.split_year));
    }
    const auto train_design = design.subset(train);
    const auto fitted = fit_design(spec, train_design, cv_fit_options());
    const auto effects = estimate_effects(train_design, fitted);
    const auto province_factor = factor_index(design, "province");

    RmseResult out;
    double sse = 0.0;
    for (std::size_t i = 0; i < design.years.size(); ++i) {
        if (!test[i]) continue;
        const auto row = static_cast<Eigen::Index>(i);
        double pred = design.x.row(row).dot(fitted.coefficients);
        bool skip = false;
        for (std::size_t f = 0; f < design.factor_keys.size(); ++f) {
            bool seen = false;
            pred += effects.value(f, design.factor_keys[f][i], seen);
            if (!seen && static_cast<std::ptrdiff_t>(f) == province_factor) skip = true;
        }
        if (skip) {
            ++out.n_skipped;
            continue;
        }
        const double e = design.y[row] - pred;
        sse += e * e;
        ++out.n_predicted;
    }
    if (out.n_predicted == 0) fail(ErrorKind::too_few_observations, "no predictable out-of-time rows");
    out.rmse = std::sqrt(sse / static_cast<double>(out.n_predicted));
    return out;
}

RmseResult group_kfold_rmse(const CandidateBinConfig& candidate, const PanelDataset& data,
                            const SelectionOptions& options) {
    const auto spec = candidate_spec(candidate, options);
    const auto full = build_design(spec, data);
    std::vector<bool> in_window(full.years.size());
    for (std::size_t i = 0; i < full.years.size(); ++i) in_window[i] = full.years[i] <= options.split_year;
    const auto design = full.subset(in_window);
    const std::set<int> provinces(design.clusters.begin(), design.clusters.end());
    if (provinces.size() < 2) fail(ErrorKind::too_few_groups, "group k-fold needs at least two provinces");
    const std::vector<int> folds(provinces.begin(), provinces.end());
    const auto province_factor = factor_index(design, "province");

    std::vector<double> fold_sse(folds.size(), 0.0);
    std::vector<std::size_t> fold_n(folds.size(), 0);
    parallel_for(folds.size(), [&](std::size_t k) {
        const int held = folds[k];
        std::vector<bool> train(design.clusters.size());
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < design.clusters.size(); ++i) {
            train[i] = design.clusters[i] != held;
            if (!train[i]) rows.push_back(static_cast<Eigen::Index>(i));
        }
        const auto train_design = design.subset(train);
        const auto fitted = fit_design(spec, train_design, cv_fit_options());
        const auto effects = estimate_effects(train_design, fitted);

        // Outcome net of the non-province effects, then within-province.
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), design.x.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto i = rows[r];
            double other = 0.0;
            for (std::size_t f = 0; f < design.factor_keys.size(); ++f) {
                if (static_cast<std::ptrdiff_t>(f) == province_factor) continue;
                bool seen = false;
                other += effects.value(f, design.factor_keys[f][static_cast<std::size_t>(i)], seen);
            }
            y[static_cast<Eigen::Index>(r)] = design.y[i] - other;
            x.row(static_cast<Eigen::Index>(r)) = design.x.row(i);
        }
        if (province_factor >= 0) {
            y.array() -= y.mean();
            x.rowwise() -= x.colwise().mean();
        }
        fold_sse[k] = (y - x * fitted.coefficients).squaredNorm();
        fold_n[k] = rows.size();
    });
    RmseResult out;
    double sse = 0.0;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        sse += fold_sse[k];
        out.n_predicted += fold_n[k];
    }
    out.rmse = std::sqrt(sse / static_cast<double>(out.n_predicted));
    return out;
}

CvReport select(std::span<const CandidateBinConfig> candidates, const PanelDataset& data,
                const SelectionOptions& options) {
    if (candidates.empty()) fail(ErrorKind::invalid_argument, "no candidates to select from");
    CvReport report;
    report.scores.resize(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto oot = oot_rmse(candidates[i], data, options);
        const auto oos = group_kfold_rmse(candidates[i], data, options);
        report.scores[i] = {candidates[i], oot.rmse, oos.rmse, oot.n_skipped};
    }
    const auto better = [&](const CandidateScore& a, const CandidateScore& b) {
        if (std::abs(a.rmse_oot - b.rmse_oot) > 1e-6) return a.rmse_oot < b.rmse_oot;
        if (a.rmse_oos != b.rmse_oos) return a.rmse_oos < b.rmse_oos;
        if (a.candidate.lower_edge != b.candidate.lower_edge) return a.candidate.lower_edge < b.candidate.lower_edge;
        return a.candidate.interval < b.candidate.interval;
    };
    for (std::size_t i = 1; i < report.scores.size(); ++i) {
        if (better(report.scores[i], report.scores[report.winner])) report.winner = i;
    }
    return report;
}

}  // namespace climpanel
