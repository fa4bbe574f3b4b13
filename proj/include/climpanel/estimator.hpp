#pragma once

// Two-way fixed-effects growth regressions on annual weather regressors.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "climpanel/demean.hpp"
#include "climpanel/panel.hpp"

namespace climpanel {

enum class Form { polynomial, bins, degree_days, interacted_average };
enum class IncomeKind { none, level, log };
enum class Interaction { none, low_income };
enum class Trend { none, quadratic_country, quadratic_province };
enum class PrecipControl { none, matched };
enum class Group { pooled, low, high };

struct FixedEffectSet {
    bool province = true;
    bool year = true;
    bool region_year = false;
    bool poor_year = false;
};

struct ModelSpec {
    Form form = Form::polynomial;
    int poly_order = 2;
    std::vector<double> bin_edges{13, 18, 23, 28, 33, 38};
    int omitted_bin = 3;         // 0-based; the default omits [23, 28)
    int precip_omitted_bin = 0;  // 0-based; the default omits dry days
    double hdd_threshold = 23.0;
    double cdd_threshold = 28.0;
    IncomeKind income_kind = IncomeKind::none;
    int n_lags = 0;
    Interaction interaction = Interaction::none;
    FixedEffectSet fixed_effects;
    Trend trend = Trend::none;
    PrecipControl precip_control = PrecipControl::matched;
    bool lagged_dependent = false;
    std::string outcome = "growth";
    std::string income_column = "gpp_pc";

    void validate() const;
    int temperature_bin_count() const { return static_cast<int>(bin_edges.size()) + 1; }
};

const char* to_string(Form form);
const char* to_string(Group group);

// A regressor built as the sum of panel columns, optionally scaled by a
// province-level constant.
struct TermDef {
    enum class Scale { none, mean_temperature, mean_precip, mean_income };
    std::string name;
    std::vector<std::string> columns;
    Scale scale = Scale::none;
};

enum class ColumnKind { temperature, precipitation, trend, lagged_outcome };

struct ColumnRole {
    ColumnKind kind;
    int term = 0;  // index into the temperature or precipitation term list
    int lag = 0;
    Group group = Group::pooled;
};

struct DesignLayout {
    std::vector<TermDef> temperature_terms;
    std::vector<TermDef> precip_terms;
    std::vector<std::string> names;
    std::vector<ColumnRole> roles;
};

// Column layout of a spec against the columns a panel provides. Trend columns
// are only laid out when `trend_provinces` is given.
DesignLayout make_layout(const ModelSpec& spec, const std::vector<std::string>& available_columns,
                         const std::vector<std::string>& trend_provinces = {});

std::vector<TermDef> temperature_terms(const ModelSpec& spec, const std::vector<std::string>& available_columns);
std::vector<TermDef> precipitation_terms(const ModelSpec& spec, const std::vector<std::string>& available_columns);

struct Design {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    DesignLayout layout;
    std::vector<std::size_t> panel_rows;
    std::vector<int> clusters;
    std::vector<int> years;
    std::vector<std::string> factor_names;
    std::vector<std::vector<long>> factor_keys;  // raw key per factor per row

    Design subset(const std::vector<bool>& keep) const;
    std::vector<FactorCodes> factors() const;
};

Design build_design(const ModelSpec& spec, const PanelDataset& data);

struct FitOptions {
    DemeanOptions demean;
    bool compute_vcov = true;
    // Smallest singular value of the column-equilibrated demeaned design
    // relative to the largest.
    double rank_tolerance = 1e-10;
};

struct FitResult {
    ModelSpec spec;
    DesignLayout layout;
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd vcov;
    std::size_t n_obs = 0;
    double r2 = 0.0;
    double within_r2 = 0.0;
    std::size_t cluster_count = 0;
    Eigen::VectorXd residuals;
    std::vector<int> clusters;

    const std::vector<std::string>& names() const { return layout.names; }
    std::optional<std::size_t> index_of(const std::string& name) const;
    double coefficient(const std::string& name) const;
    double std_error(const std::string& name) const;
};

// OLS on an already built design. The returned residuals are those of the
// demeaned system.
FitResult fit_design(const ModelSpec& spec, const Design& design, const FitOptions& options = {});
FitResult fit(const ModelSpec& spec, const PanelDataset& data, const FitOptions& options = {});
FitResult fit_interacted(ModelSpec spec, const PanelDataset& data, const FitOptions& options = {});

// Result carrying only a coefficient vector, laid out for `spec` over the
// given panel columns. Missing coefficients are zero; vcov defaults to zero.
FitResult fixed_coefficients(const ModelSpec& spec, const std::vector<std::string>& available_columns,
                             const std::map<std::string, double>& coefficients,
                             const std::optional<Eigen::MatrixXd>& vcov = std::nullopt);

// (X'X)^-1 (sum_g X_g' e_g e_g' X_g) (X'X)^-1 scaled by G/(G-1) (N-1)/(N-K).
Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    std::span<const int> clusters);

struct ResponseEval {
    double temperature = 0.0;
    double reference = 0.0;
    double effect = 0.0;  // percentage points per day
    double std_err = 0.0;
    int n_lags_included = 0;
};

struct Support {
    double lower = 11.0;
    double upper = 41.0;
};

// Effect of one day at `temperature` relative to one at `reference`,
// cumulated over lags 0..lags (all lags when not given).
ResponseEval response_at(const FitResult& fit, double temperature, double reference,
                         std::optional<int> lags = std::nullopt, Group group = Group::pooled, Support support = {});

// Linearized annual effect of warming, percent per degree C.
double marginal_warming_rate(const FitResult& fit, double eval_temperature, double reference,
                             Group group = Group::pooled);

struct MarginalEffect {
    double at = 0.0;
    double effect = 0.0;
    double std_err = 0.0;
};

FitResult fit_alternative_formulation(const PanelDataset& data, IncomeKind income_kind, ModelSpec base = {},
                                      const FitOptions& options = {});
// beta1 + beta2 * mean_temperature for a fit_alternative_formulation result.
MarginalEffect alternative_marginal_effect(const FitResult& fit, double mean_temperature);

// Contribution of lag `lag` temperature coefficients applied to an annual
// regressor vector given by column name: sum_k beta_k * term_k(regressors).
double temperature_effect(const FitResult& fit, const std::map<std::string, double>& regressors, int lag,
                          Group group = Group::pooled);

// Same with a coefficient vector other than fit.coefficients (bootstrap draws).
double temperature_effect(const FitResult& fit, const Eigen::VectorXd& coefficients,
                          const std::map<std::string, double>& regressors, int lag, Group group = Group::pooled);

}  // namespace climpanel
