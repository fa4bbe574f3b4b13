#pragma once

// Within-transformation by alternating projections over fixed-effect factors.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace climpanel {

// One categorical factor: a dense group id (0..n_groups-1) per observation.
struct FactorCodes {
    std::vector<int> codes;
    int n_groups = 0;
};

FactorCodes make_factor(std::span<const long> keys);

struct DemeanOptions {
    // A sweep converges when no entry moves by more than tolerance times the
    // column's largest magnitude (at least 1).
    double tolerance = 1e-10;
    int max_sweeps = 10000;
};

struct DemeanResult {
    Eigen::MatrixXd data;
    int sweeps = 0;  // largest sweep count over the columns
};

// Demeans every column of `data` by each factor in turn until convergence.
// Columns are processed across OpenMP threads. Throws ConvergenceFailure.
DemeanResult absorb_fixed_effects(const Eigen::MatrixXd& data, std::span<const FactorCodes> factors,
                                  const DemeanOptions& options = {});

namespace serial {
DemeanResult absorb_fixed_effects(const Eigen::MatrixXd& data, std::span<const FactorCodes> factors,
                                  const DemeanOptions& options = {});
}

// Group effects of a vector under additive factors, found by backfitting:
// v ~ sum_f effect_f[code_f]. Effects are identified up to the usual
// normalization across factors.
std::vector<std::vector<double>> recover_effects(const Eigen::VectorXd& v, std::span<const FactorCodes> factors,
                                                 const DemeanOptions& options = {});

}  // namespace climpanel
