#pragma once

// Cross-validated choice of the omitted temperature bin and bin width.

#include <span>
#include <vector>

#include "climpanel/estimator.hpp"

namespace climpanel {

struct CandidateBinConfig {
    double lower_edge = 23.0;
    double interval = 5.0;
};

struct SelectionOptions {
    // Training covers years <= split_year; out-of-time testing the rest.
    int split_year = 2014;
    // The omitted bin of every candidate must contain this temperature.
    double pivot = 26.0;
    // Bin edges are laid out every `interval` degrees within this range.
    double edge_min = 13.0;
    double edge_max = 38.0;
    // Fixed effects, precipitation control and outcome come from here.
    ModelSpec base = [] {
        ModelSpec s;
        s.form = Form::bins;
        return s;
    }();
};

// Binned spec whose omitted bin is [lower_edge, lower_edge + interval).
ModelSpec candidate_spec(const CandidateBinConfig& candidate, const SelectionOptions& options = {});

struct RmseResult {
    double rmse = 0.0;
    std::size_t n_predicted = 0;
    std::size_t n_skipped = 0;  // test rows whose province was not in training
};

// Fit on years <= split, predict later years with the training province
// effects and the mean training year effect.
RmseResult oot_rmse(const CandidateBinConfig& candidate, const PanelDataset& data, const SelectionOptions& options = {});

// Leave-one-province-out over years <= split. The held-out province's effect
// is unknown, so its within-transformed outcome is predicted; residuals are
// pooled across folds.
RmseResult group_kfold_rmse(const CandidateBinConfig& candidate, const PanelDataset& data,
                            const SelectionOptions& options = {});

struct CandidateScore {
    CandidateBinConfig candidate;
    double rmse_oot = 0.0;
    double rmse_oos = 0.0;
    std::size_t oot_skipped = 0;
};

struct CvReport {
    std::vector<CandidateScore> scores;  // input order
    std::size_t winner = 0;
};

// Winner minimizes out-of-time RMSE; values within 1e-6 fall back to the
// group k-fold RMSE, then to the smaller (lower_edge, interval).
CvReport select(std::span<const CandidateBinConfig> candidates, const PanelDataset& data,
                const SelectionOptions& options = {});

}  // namespace climpanel
