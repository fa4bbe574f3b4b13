#include "climpanel/demean.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "climpanel/errors.hpp"
#include "climpanel/parallel.hpp"

namespace climpanel {

FactorCodes make_factor(std::span<const long> keys) {
    std::map<long, int> ids;
    for (long k : keys) ids.emplace(k, 0);
    int next = 0;
    for (auto& [_, id] : ids) id = next++;
    FactorCodes f;
    f.n_groups = next;
    f.codes.reserve(keys.size());
    for (long k : keys) f.codes.push_back(ids[k]);
    return f;
}

namespace {

struct GroupCounts {
    std::vector<std::vector<double>> inv_counts;
};

GroupCounts count_groups(std::span<const FactorCodes> factors, Eigen::Index n) {
    GroupCounts g;
    for (const auto& f : factors) {
        if (static_cast<Eigen::Index>(f.codes.size()) != n) {
            fail(ErrorKind::invalid_argument, "factor length does not match observations");
        }
        std::vector<double> counts(static_cast<std::size_t>(f.n_groups), 0.0);
        for (int c : f.codes) counts[static_cast<std::size_t>(c)] += 1.0;
        for (auto& c : counts) {
            if (c == 0.0) fail(ErrorKind::invalid_argument, "fixed-effect group without observations");
            c = 1.0 / c;
        }
        g.inv_counts.push_back(std::move(counts));
    }
    return g;
}

// Returns the number of sweeps used.
int demean_column(double* col, Eigen::Index n, std::span<const FactorCodes> factors, const GroupCounts& groups,
                  const DemeanOptions& options, std::vector<double>& sums) {
    if (factors.empty()) return 0;
    double scale = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(col[i]));
    const double tol = options.tolerance * scale;
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (std::size_t f = 0; f < factors.size(); ++f) {
            const auto& codes = factors[f].codes;
            const auto& inv = groups.inv_counts[f];
            sums.assign(inv.size(), 0.0);
            for (Eigen::Index i = 0; i < n; ++i) sums[static_cast<std::size_t>(codes[static_cast<std::size_t>(i)])] += col[i];
            for (std::size_t g = 0; g < sums.size(); ++g) {
                sums[g] *= inv[g];
                max_change = std::max(max_change, std::abs(sums[g]));
            }
            for (Eigen::Index i = 0; i < n; ++i) col[i] -= sums[static_cast<std::size_t>(codes[static_cast<std::size_t>(i)])];
        }
        // With a single factor one pass is exact.
        if (factors.size() == 1 || max_change <= tol) return sweep;
    }
    fail(ErrorKind::convergence_failure, fmt::format("fixed-effect absorption did not converge in {} sweeps",
                                                     options.max_sweeps));
}

template <typename Loop>
DemeanResult absorb_with(const Eigen::MatrixXd& data, std::span<const FactorCodes> factors,
                         const DemeanOptions& options, Loop&& loop) {
    DemeanResult out{data, 0};
    const auto groups = count_groups(factors, data.rows());
    std::vector<int> sweeps(static_cast<std::size_t>(data.cols()), 0);
    loop(static_cast<std::size_t>(data.cols()), [&](std::size_t j) {
        std::vector<double> sums;
        sweeps[j] = demean_column(out.data.col(static_cast<Eigen::Index>(j)).data(), data.rows(), factors, groups,
                                  options, sums);
    });
    out.sweeps = sweeps.empty() ? 0 : *std::max_element(sweeps.begin(), sweeps.end());
    return out;
}

}  // namespace

DemeanResult absorb_fixed_effects(const Eigen::MatrixXd& data, std::span<const FactorCodes> factors,
                                  const DemeanOptions& options) {
    return absorb_with(data, factors, options, [](std::size_t n, auto&& fn) { parallel_for(n, fn); });
}

namespace serial {
DemeanResult absorb_fixed_effects(const Eigen::MatrixXd& data, std::span<const FactorCodes> factors,
                                  const DemeanOptions& options) {
    return absorb_with(data, factors, options, [](std::size_t n, auto&& fn) { serial_for(n, fn); });
}
}  // namespace serial

std::vector<std::vector<double>> recover_effects(const Eigen::VectorXd& v, std::span<const FactorCodes> factors,
                                                 const DemeanOptions& options) {
    const auto groups = count_groups(factors, v.size());
    std::vector<std::vector<double>> effects;
    for (const auto& f : factors) effects.emplace_back(static_cast<std::size_t>(f.n_groups), 0.0);
    Eigen::VectorXd resid = v;
    double scale = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) scale = std::max(scale, std::abs(v[i]));
    std::vector<double> sums;
    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (std::size_t f = 0; f < factors.size(); ++f) {
            const auto& codes = factors[f].codes;
            sums.assign(effects[f].size(), 0.0);
            for (Eigen::Index i = 0; i < v.size(); ++i) sums[static_cast<std::size_t>(codes[static_cast<std::size_t>(i)])] += resid[i];
            for (std::size_t g = 0; g < sums.size(); ++g) {
                sums[g] *= groups.inv_counts[f][g];
                effects[f][g] += sums[g];
                max_change = std::max(max_change, std::abs(sums[g]));
            }
            for (Eigen::Index i = 0; i < v.size(); ++i) resid[i] -= sums[static_cast<std::size_t>(codes[static_cast<std::size_t>(i)])];
        }
        if (factors.size() <= 1 || max_change <= options.tolerance * scale) return effects;
    }
    fail(ErrorKind::convergence_failure, "fixed-effect recovery did not converge");
}

}  // namespace climpanel
