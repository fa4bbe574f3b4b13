#include "climpanel/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "climpanel/errors.hpp"
#include "climpanel/schema.hpp"
#include "climpanel/weather.hpp"

namespace climpanel {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

bool has(const std::vector<std::string>& cols, const std::string& name) {
    return std::find(cols.begin(), cols.end(), name) != cols.end();
}

void require(const std::vector<std::string>& cols, const std::string& name) {
    if (!has(cols, name)) fail(ErrorKind::schema_violation, "panel has no column '" + name + "'");
}

std::pair<double, double> bin_interval(const std::vector<double>& edges, int bin) {
    const auto b = static_cast<std::size_t>(bin);
    return {b == 0 ? -inf : edges[b - 1], b == edges.size() ? inf : edges[b]};
}

// Panel columns whose [lo, hi) intervals tile [lower, upper) exactly.
std::vector<std::string> tile_bin(const std::vector<std::string>& cols, double lower, double upper) {
    const auto exact = schema::temp_bin_column(lower, upper);
    if (has(cols, exact)) return {exact};
    std::vector<std::pair<std::pair<double, double>, std::string>> parts;
    for (const auto& c : cols) {
        if (auto iv = schema::parse_temp_bin_column(c)) {
            if (iv->first >= lower && iv->second <= upper) parts.push_back({*iv, c});
        }
    }
    std::vector<std::string> out;
    double cursor = lower;
    while (cursor < upper) {
        const std::string* best = nullptr;
        double best_upper = cursor;
        for (const auto& [iv, name] : parts) {
            if (iv.first == cursor && iv.second > best_upper) {
                best = &name;
                best_upper = iv.second;
            }
        }
        if (!best) {
            fail(ErrorKind::invalid_bins, fmt::format("panel temperature-bin columns cannot represent {}",
                                                      schema::temp_bin_column(lower, upper)));
        }
        out.push_back(*best);
        cursor = best_upper;
    }
    return out;
}

int precip_bin_count(const std::vector<std::string>& cols) {
    int n = 0;
    while (has(cols, schema::precip_bin_column(n + 1))) ++n;
    return n;
}

std::string lag_suffix(int lag) { return lag == 0 ? std::string{} : fmt::format("_L{}", lag); }

std::string group_suffix(Group g) {
    switch (g) {
        case Group::low: return ":low";
        case Group::high: return ":high";
        default: return {};
    }
}

std::vector<Group> groups_of(const ModelSpec& spec) {
    if (spec.interaction == Interaction::low_income) return {Group::low, Group::high};
    return {Group::pooled};
}

double term_basis(const ModelSpec& spec, int term, double t) {
    switch (spec.form) {
        case Form::polynomial: return std::pow(t, term + 1);
        case Form::bins: {
            const int bin = term < spec.omitted_bin ? term : term + 1;
            const auto [lo, hi] = bin_interval(spec.bin_edges, bin);
            return (t >= lo && t < hi) ? 1.0 : 0.0;
        }
        case Form::degree_days:
            return term == 0 ? std::max(0.0, spec.hdd_threshold - t) : std::max(0.0, t - spec.cdd_threshold);
        case Form::interacted_average: break;
    }
    fail(ErrorKind::invalid_argument, "single-day responses are not defined for the interacted-average form");
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                         std::span<const int> clusters) {
    const auto n = x.rows();
    const auto k = x.cols();
    if (static_cast<Eigen::Index>(clusters.size()) != n) fail(ErrorKind::invalid_argument, "cluster ids length mismatch");
    std::map<int, Eigen::VectorXd> scores;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto [it, inserted] = scores.try_emplace(clusters[static_cast<std::size_t>(i)], Eigen::VectorXd::Zero(k));
        it->second.noalias() += x.row(i).transpose() * residuals[i];
    }
    const auto g = static_cast<double>(scores.size());
    if (scores.size() < 2) fail(ErrorKind::degenerate_clustering, "clustered covariance needs at least two clusters");
    if (n <= k) fail(ErrorKind::too_few_observations, "no residual degrees of freedom");
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [_, s] : scores) meat.noalias() += s * s.transpose();
    const double factor = g / (g - 1.0) * (static_cast<double>(n) - 1.0) / static_cast<double>(n - k);
    Eigen::MatrixXd v = factor * bread * meat * bread;
    return 0.5 * (v + v.transpose());
}

Eigen::VectorXd column_norms(const Eigen::MatrixXd& x) {
    Eigen::VectorXd s(x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) s[j] = x.col(j).norm();
    return s;
}

Eigen::MatrixXd bread_of(const Eigen::MatrixXd& x) {
    const Eigen::VectorXd s = column_norms(x);
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        if (s[j] == 0.0) fail(ErrorKind::collinear_design, fmt::format("design column {} is identically zero", j));
    }
    const Eigen::MatrixXd xs = x * s.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd inv_s = (xs.transpose() * xs).ldlt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
    return s.cwiseInverse().asDiagonal() * inv_s * s.cwiseInverse().asDiagonal();
}

std::vector<double> per_province_mean(const PanelDataset& data, const std::vector<double>& values) {
    std::vector<double> sum(data.province_count(), 0.0);
    std::vector<int> n(data.province_count(), 0);
    for (std::size_t r = 0; r < data.rows(); ++r) {
        if (!std::isfinite(values[r])) continue;
        sum[static_cast<std::size_t>(data.province_index(r))] += values[r];
        ++n[static_cast<std::size_t>(data.province_index(r))];
    }
    for (std::size_t p = 0; p < sum.size(); ++p) {
        sum[p] = n[p] ? sum[p] / n[p] : std::numeric_limits<double>::quiet_NaN();
    }
    return sum;
}

std::vector<double> per_day(const PanelDataset& data, const std::string& column) {
    std::vector<double> out(data.column(column));
    for (std::size_t r = 0; r < data.rows(); ++r) out[r] /= weather::days_in_year(data.year(r));
    return out;
}

}  // namespace

const char* to_string(Form form) {
    switch (form) {
        case Form::polynomial: return "polynomial";
        case Form::bins: return "bins";
        case Form::degree_days: return "degree_days";
        case Form::interacted_average: return "interacted_average";
    }
    return "?";
}

const char* to_string(Group group) {
    switch (group) {
        case Group::pooled: return "pooled";
        case Group::low: return "low";
        case Group::high: return "high";
    }
    return "?";
}

void ModelSpec::validate() const {
    if (form == Form::polynomial && (poly_order < 1 || poly_order > 7)) {
        fail(ErrorKind::invalid_argument, "polynomial order must be in 1..7");
    }
    if (form == Form::bins) {
        if (bin_edges.empty()) fail(ErrorKind::invalid_bins, "bin edge list is empty");
        for (std::size_t i = 1; i < bin_edges.size(); ++i) {
            if (!(bin_edges[i] > bin_edges[i - 1])) fail(ErrorKind::invalid_bins, "bin edges must be strictly ascending");
        }
        if (omitted_bin < 0 || omitted_bin >= temperature_bin_count()) {
            fail(ErrorKind::invalid_bins, fmt::format("omitted bin {} is not a valid bin", omitted_bin));
        }
    }
    if (form == Form::degree_days && hdd_threshold > cdd_threshold) {
        fail(ErrorKind::invalid_argument, "hdd threshold exceeds cdd threshold");
    }
    if (n_lags < 0 || n_lags > 5) fail(ErrorKind::invalid_argument, "n_lags must be in 0..5");
    if (outcome.empty()) fail(ErrorKind::invalid_argument, "outcome column not set");
}

std::vector<TermDef> temperature_terms(const ModelSpec& spec, const std::vector<std::string>& cols) {
    std::vector<TermDef> terms;
    switch (spec.form) {
        case Form::polynomial:
            for (int m = 1; m <= spec.poly_order; ++m) {
                const auto name = schema::poly_column(m);
                require(cols, name);
                terms.push_back({name, {name}});
            }
            break;
        case Form::bins:
            for (int b = 0; b < spec.temperature_bin_count(); ++b) {
                if (b == spec.omitted_bin) continue;
                const auto [lo, hi] = bin_interval(spec.bin_edges, b);
                terms.push_back({schema::temp_bin_column(lo, hi), tile_bin(cols, lo, hi)});
            }
            break;
        case Form::degree_days: {
            const auto h = schema::hdd_column(spec.hdd_threshold);
            const auto c = schema::cdd_column(spec.cdd_threshold);
            require(cols, h);
            require(cols, c);
            terms.push_back({h, {h}});
            terms.push_back({c, {c}});
            break;
        }
        case Form::interacted_average: {
            const auto t = schema::poly_column(1);
            require(cols, t);
            terms.push_back({"temp", {t}});
            terms.push_back({"temp_x_tbar", {t}, TermDef::Scale::mean_temperature});
            if (spec.income_kind != IncomeKind::none) terms.push_back({"temp_x_ybar", {t}, TermDef::Scale::mean_income});
            break;
        }
    }
    return terms;
}

std::vector<TermDef> precipitation_terms(const ModelSpec& spec, const std::vector<std::string>& cols) {
    std::vector<TermDef> terms;
    if (spec.precip_control == PrecipControl::none) return terms;
    const std::string lin(schema::precip_linear);
    const std::string sq(schema::precip_sq);
    switch (spec.form) {
        case Form::polynomial:
            require(cols, lin);
            require(cols, sq);
            terms.push_back({lin, {lin}});
            terms.push_back({sq, {sq}});
            break;
        case Form::bins: {
            const int n = precip_bin_count(cols);
            if (n == 0) fail(ErrorKind::schema_violation, "panel has no precipitation bin columns");
            if (spec.precip_omitted_bin < 0 || spec.precip_omitted_bin >= n) {
                fail(ErrorKind::invalid_bins, "omitted precipitation bin is not a valid bin");
            }
            for (int b = 0; b < n; ++b) {
                if (b == spec.precip_omitted_bin) continue;
                const auto name = schema::precip_bin_column(b + 1);
                terms.push_back({name, {name}});
            }
            break;
        }
        case Form::degree_days:
            require(cols, lin);
            terms.push_back({lin, {lin}});
            break;
        case Form::interacted_average:
            require(cols, lin);
            terms.push_back({"prcp", {lin}});
            terms.push_back({"prcp_x_rbar", {lin}, TermDef::Scale::mean_precip});
            if (spec.income_kind != IncomeKind::none) terms.push_back({"prcp_x_ybar", {lin}, TermDef::Scale::mean_income});
            break;
    }
    return terms;
}

DesignLayout make_layout(const ModelSpec& spec, const std::vector<std::string>& cols,
                         const std::vector<std::string>& trend_provinces) {
    spec.validate();
    DesignLayout layout;
    layout.temperature_terms = temperature_terms(spec, cols);
    layout.precip_terms = precipitation_terms(spec, cols);
    const auto add_block = [&](ColumnKind kind, const std::vector<TermDef>& terms) {
        for (Group g : groups_of(spec)) {
            for (int l = 0; l <= spec.n_lags; ++l) {
                for (std::size_t k = 0; k < terms.size(); ++k) {
                    layout.names.push_back(terms[k].name + lag_suffix(l) + group_suffix(g));
                    layout.roles.push_back({kind, static_cast<int>(k), l, g});
                }
            }
        }
    };
    add_block(ColumnKind::temperature, layout.temperature_terms);
    add_block(ColumnKind::precipitation, layout.precip_terms);
    if (spec.trend == Trend::quadratic_country) {
        layout.names.emplace_back("trend_t");
        layout.roles.push_back({ColumnKind::trend, 1, 0, Group::pooled});
        layout.names.emplace_back("trend_t2");
        layout.roles.push_back({ColumnKind::trend, 2, 0, Group::pooled});
    } else if (spec.trend == Trend::quadratic_province) {
        // With year effects the trends of one province are implied by the others.
        const std::size_t first = spec.fixed_effects.year ? 1 : 0;
        for (std::size_t p = first; p < trend_provinces.size(); ++p) {
            layout.names.push_back("trend_t:" + trend_provinces[p]);
            layout.roles.push_back({ColumnKind::trend, 1, static_cast<int>(p), Group::pooled});
            layout.names.push_back("trend_t2:" + trend_provinces[p]);
            layout.roles.push_back({ColumnKind::trend, 2, static_cast<int>(p), Group::pooled});
        }
    }
    if (spec.lagged_dependent) {
        layout.names.push_back(spec.outcome + "_L1");
        layout.roles.push_back({ColumnKind::lagged_outcome, 0, 1, Group::pooled});
    }
    return layout;
}

Design Design::subset(const std::vector<bool>& keep) const {
    Design out;
    out.layout = layout;
    out.factor_names = factor_names;
    out.factor_keys.resize(factor_keys.size());
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        idx.push_back(static_cast<Eigen::Index>(i));
        out.panel_rows.push_back(panel_rows[i]);
        out.clusters.push_back(clusters[i]);
        out.years.push_back(years[i]);
        for (std::size_t f = 0; f < factor_keys.size(); ++f) out.factor_keys[f].push_back(factor_keys[f][i]);
    }
    out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    out.y.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.x.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
        out.y[static_cast<Eigen::Index>(i)] = y[idx[i]];
    }
    return out;
}

std::vector<FactorCodes> Design::factors() const {
    std::vector<FactorCodes> out;
    for (const auto& keys : factor_keys) out.push_back(make_factor(keys));
    return out;
}

Design build_design(const ModelSpec& spec, const PanelDataset& data) {
    Design d;
    const bool province_trend = spec.trend == Trend::quadratic_province;
    d.layout = make_layout(spec, data.column_names(), province_trend ? data.province_ids() : std::vector<std::string>{});
    const auto& outcome = data.column(spec.outcome);
    const std::size_t n_rows = data.rows();

    // Province-level constants for the interacted-average form.
    std::vector<double> mean_temp, mean_precip, mean_income;
    const auto needs = [&](TermDef::Scale s) {
        for (const auto* terms : {&d.layout.temperature_terms, &d.layout.precip_terms}) {
            for (const auto& t : *terms) {
                if (t.scale == s) return true;
            }
        }
        return false;
    };
    if (needs(TermDef::Scale::mean_temperature)) mean_temp = per_province_mean(data, per_day(data, schema::poly_column(1)));
    if (needs(TermDef::Scale::mean_precip)) mean_precip = per_province_mean(data, per_day(data, std::string(schema::precip_linear)));
    if (needs(TermDef::Scale::mean_income)) {
        auto income = data.column(spec.income_column);
        if (spec.income_kind == IncomeKind::log) {
            for (auto& v : income) {
                if (!(v > 0.0)) fail(ErrorKind::invalid_data, "log income needs positive " + spec.income_column);
                v = std::log(v);
            }
        } else {
            for (auto& v : income) v /= 1e5;
        }
        mean_income = per_province_mean(data, income);
        double centre = 0.0;
        for (double v : mean_income) centre += v;
        centre /= static_cast<double>(mean_income.size());
        for (auto& v : mean_income) v -= centre;
    }

    const auto term_values = [&](const TermDef& t) {
        std::vector<double> v(n_rows, 0.0);
        for (const auto& c : t.columns) {
            const auto& col = data.column(c);
            for (std::size_t r = 0; r < n_rows; ++r) v[r] += col[r];
        }
        const std::vector<double>* scale = nullptr;
        if (t.scale == TermDef::Scale::mean_temperature) scale = &mean_temp;
        if (t.scale == TermDef::Scale::mean_precip) scale = &mean_precip;
        if (t.scale == TermDef::Scale::mean_income) scale = &mean_income;
        if (scale) {
            for (std::size_t r = 0; r < n_rows; ++r) v[r] *= (*scale)[static_cast<std::size_t>(data.province_index(r))];
        }
        return v;
    };
    std::vector<std::vector<double>> temp_values, precip_values;
    for (const auto& t : d.layout.temperature_terms) temp_values.push_back(term_values(t));
    for (const auto& t : d.layout.precip_terms) precip_values.push_back(term_values(t));

    int base_year = std::numeric_limits<int>::max();
    for (std::size_t r = 0; r < n_rows; ++r) base_year = std::min(base_year, data.year(r));

    // Row eligibility: outcome and every lagged term present.
    std::vector<std::vector<std::size_t>> lag_rows;  // per kept row, panel row of each lag
    const int max_lag = std::max(spec.n_lags, spec.lagged_dependent ? 1 : 0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        if (!std::isfinite(outcome[r])) continue;
        std::vector<std::size_t> lr;
        bool ok = true;
        for (int l = 0; l <= max_lag && ok; ++l) {
            const auto src = l == 0 ? std::optional<std::size_t>(r) : data.find_row(data.province_index(r), data.year(r) - l);
            if (!src) {
                ok = false;
                break;
            }
            if (l <= spec.n_lags) {
                for (const auto& v : temp_values) ok = ok && std::isfinite(v[*src]);
                for (const auto& v : precip_values) ok = ok && std::isfinite(v[*src]);
            }
            if (spec.lagged_dependent && l == 1) ok = ok && std::isfinite(outcome[*src]);
            lr.push_back(*src);
        }
        if (!ok) continue;
        if (spec.fixed_effects.region_year && data.region(r).empty()) {
            fail(ErrorKind::invalid_data, "region-by-year effects need region_id for province " + data.province(r));
        }
        d.panel_rows.push_back(r);
        lag_rows.push_back(std::move(lr));
    }
    const auto n = static_cast<Eigen::Index>(d.panel_rows.size());
    const auto k = static_cast<Eigen::Index>(d.layout.names.size());
    if (n == 0 || n <= k) {
        fail(ErrorKind::too_few_observations,
             fmt::format("{} usable rows for {} design columns (n_lags = {})", n, k, spec.n_lags));
    }

    std::map<std::string, long> region_ids;
    d.x.resize(n, k);
    d.y.resize(n);
    if (spec.fixed_effects.province) d.factor_names.emplace_back("province");
    if (spec.fixed_effects.year) d.factor_names.emplace_back("year");
    if (spec.fixed_effects.region_year) d.factor_names.emplace_back("region_year");
    if (spec.fixed_effects.poor_year) d.factor_names.emplace_back("poor_year");
    d.factor_keys.resize(d.factor_names.size());

    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t r = d.panel_rows[static_cast<std::size_t>(i)];
        const auto& lr = lag_rows[static_cast<std::size_t>(i)];
        const bool low = data.low_income(r);
        const int p = data.province_index(r);
        const double t = static_cast<double>(data.year(r) - base_year);
        for (Eigen::Index j = 0; j < k; ++j) {
            const auto& role = d.layout.roles[static_cast<std::size_t>(j)];
            double v = 0.0;
            switch (role.kind) {
                case ColumnKind::temperature:
                    v = temp_values[static_cast<std::size_t>(role.term)][lr[static_cast<std::size_t>(role.lag)]];
                    break;
                case ColumnKind::precipitation:
                    v = precip_values[static_cast<std::size_t>(role.term)][lr[static_cast<std::size_t>(role.lag)]];
                    break;
                case ColumnKind::trend: {
                    const double tt = role.term == 1 ? t : t * t;
                    v = (spec.trend == Trend::quadratic_country || role.lag == p) ? tt : 0.0;
                    break;
                }
                case ColumnKind::lagged_outcome: v = outcome[lr[1]]; break;
            }
            if (role.group == Group::low && !low) v = 0.0;
            if (role.group == Group::high && low) v = 0.0;
            d.x(i, j) = v;
        }
        d.y[i] = outcome[r];
        d.clusters.push_back(p);
        d.years.push_back(data.year(r));
        std::size_t f = 0;
        if (spec.fixed_effects.province) d.factor_keys[f++].push_back(p);
        if (spec.fixed_effects.year) d.factor_keys[f++].push_back(data.year(r));
        if (spec.fixed_effects.region_year) {
            const auto [it, _] = region_ids.try_emplace(data.region(r), static_cast<long>(region_ids.size()));
            d.factor_keys[f++].push_back(it->second * 100000L + data.year(r));
        }
        if (spec.fixed_effects.poor_year) d.factor_keys[f++].push_back((low ? 100000L : 0L) + data.year(r));
    }
    return d;
}

FitResult fit_design(const ModelSpec& spec, const Design& design, const FitOptions& options) {
    const auto n = design.x.rows();
    const auto k = design.x.cols();
    if (n <= k) fail(ErrorKind::too_few_observations, fmt::format("{} rows for {} columns", n, k));

    Eigen::MatrixXd stacked(n, k + 1);
    stacked.col(0) = design.y;
    stacked.rightCols(k) = design.x;
    const auto factors = design.factors();
    const auto absorbed = absorb_fixed_effects(stacked, factors, options.demean);
    const Eigen::VectorXd y = absorbed.data.col(0);
    const Eigen::MatrixXd x = absorbed.data.rightCols(k);

    // Rank check on the column-equilibrated design.
    Eigen::VectorXd s = column_norms(x);
    const Eigen::VectorXd raw_norms = column_norms(design.x);
    std::vector<std::string> zero_cols;
    for (Eigen::Index j = 0; j < k; ++j) {
        if (s[j] == 0.0 || s[j] <= 1e-9 * raw_norms[j]) {
            zero_cols.push_back(design.layout.names[static_cast<std::size_t>(j)]);
        }
    }
    if (!zero_cols.empty()) {
        fail(ErrorKind::collinear_design, fmt::format("columns absorbed by fixed effects or empty: {}",
                                                      fmt::join(zero_cols, ", ")));
    }
    const Eigen::MatrixXd xs = x * s.cwiseInverse().asDiagonal();
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(xs);
    const auto& sv = svd.singularValues();
    if (sv.minCoeff() <= options.rank_tolerance * sv.maxCoeff()) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xs);
        qr.setThreshold(options.rank_tolerance);
        std::vector<std::string> offending;
        for (Eigen::Index j = qr.rank(); j < k; ++j) {
            offending.push_back(design.layout.names[static_cast<std::size_t>(qr.colsPermutation().indices()[j])]);
        }
        if (offending.empty()) offending.push_back(design.layout.names.back());
        fail(ErrorKind::collinear_design, fmt::format("design is rank deficient; collinear columns: {}",
                                                      fmt::join(offending, ", ")));
    }

    FitResult res;
    res.spec = spec;
    res.layout = design.layout;
    const Eigen::VectorXd beta_s = xs.colPivHouseholderQr().solve(y);
    res.coefficients = s.cwiseInverse().asDiagonal() * beta_s;
    res.residuals = y - x * res.coefficients;
    res.n_obs = static_cast<std::size_t>(n);
    res.clusters = design.clusters;
    res.cluster_count = std::set<int>(design.clusters.begin(), design.clusters.end()).size();

    const double ssr = res.residuals.squaredNorm();
    const double tss = (design.y.array() - design.y.mean()).square().sum();
    res.r2 = tss > 0.0 ? 1.0 - ssr / tss : 0.0;
    const double within_tss = y.squaredNorm();
    res.within_r2 = within_tss > 0.0 ? 1.0 - ssr / within_tss : 0.0;

    if (options.compute_vcov) {
        const Eigen::MatrixXd inv_s = (xs.transpose() * xs).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
        const Eigen::MatrixXd bread = s.cwiseInverse().asDiagonal() * inv_s * s.cwiseInverse().asDiagonal();
        res.vcov = sandwich(bread, x, res.residuals, design.clusters);
    } else {
        res.vcov = Eigen::MatrixXd::Zero(k, k);
    }
    return res;
}

FitResult fit(const ModelSpec& spec, const PanelDataset& data, const FitOptions& options) {
    return fit_design(spec, build_design(spec, data), options);
}

FitResult fit_interacted(ModelSpec spec, const PanelDataset& data, const FitOptions& options) {
    spec.interaction = Interaction::low_income;
    std::set<int> low, high;
    for (std::size_t r = 0; r < data.rows(); ++r) (data.low_income(r) ? low : high).insert(data.province_index(r));
    // An empty group shows up as all-zero columns (CollinearDesign); a single
    // province cannot be clustered.
    if (low.size() == 1 || high.size() == 1) {
        fail(ErrorKind::degenerate_clustering, fmt::format("income groups have {} and {} provinces", low.size(), high.size()));
    }
    return fit(spec, data, options);
}

FitResult fixed_coefficients(const ModelSpec& spec, const std::vector<std::string>& available_columns,
                             const std::map<std::string, double>& coefficients,
                             const std::optional<Eigen::MatrixXd>& vcov) {
    FitResult res;
    res.spec = spec;
    res.layout = make_layout(spec, available_columns);
    const auto k = static_cast<Eigen::Index>(res.layout.names.size());
    res.coefficients = Eigen::VectorXd::Zero(k);
    for (const auto& [name, value] : coefficients) {
        const auto idx = res.index_of(name);
        if (!idx) fail(ErrorKind::invalid_argument, "unknown coefficient '" + name + "'");
        res.coefficients[static_cast<Eigen::Index>(*idx)] = value;
    }
    if (vcov) {
        if (vcov->rows() != k || vcov->cols() != k) fail(ErrorKind::invalid_argument, "vcov dimension mismatch");
        res.vcov = *vcov;
    } else {
        res.vcov = Eigen::MatrixXd::Zero(k, k);
    }
    return res;
}

std::optional<std::size_t> FitResult::index_of(const std::string& name) const {
    const auto it = std::find(layout.names.begin(), layout.names.end(), name);
    if (it == layout.names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - layout.names.begin());
}

double FitResult::coefficient(const std::string& name) const {
    const auto i = index_of(name);
    if (!i) fail(ErrorKind::invalid_argument, "no coefficient named '" + name + "'");
    return coefficients[static_cast<Eigen::Index>(*i)];
}

double FitResult::std_error(const std::string& name) const {
    const auto i = index_of(name);
    if (!i) fail(ErrorKind::invalid_argument, "no coefficient named '" + name + "'");
    const auto j = static_cast<Eigen::Index>(*i);
    return std::sqrt(std::max(0.0, vcov(j, j)));
}

Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& x, const Eigen::VectorXd& residuals,
                                    std::span<const int> clusters) {
    return sandwich(bread_of(x), x, residuals, clusters);
}

ResponseEval response_at(const FitResult& fit, double temperature, double reference, std::optional<int> lags,
                         Group group, Support support) {
    const auto& spec = fit.spec;
    for (double t : {temperature, reference}) {
        if (t < support.lower || t > support.upper) {
            fail(ErrorKind::out_of_range, fmt::format("temperature {} outside support [{}, {}]", t, support.lower,
                                                      support.upper));
        }
    }
    const int n_lags = lags.value_or(spec.n_lags);
    if (n_lags < 0 || n_lags > spec.n_lags) {
        fail(ErrorKind::invalid_argument, fmt::format("lags {} outside 0..{}", n_lags, spec.n_lags));
    }
    const bool interacted = spec.interaction == Interaction::low_income;
    if (interacted == (group == Group::pooled)) {
        fail(ErrorKind::invalid_argument, std::string("group '") + to_string(group) + "' does not match the fit");
    }
    Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.coefficients.size());
    for (std::size_t j = 0; j < fit.layout.roles.size(); ++j) {
        const auto& role = fit.layout.roles[j];
        if (role.kind != ColumnKind::temperature || role.lag > n_lags || role.group != group) continue;
        c[static_cast<Eigen::Index>(j)] = term_basis(spec, role.term, temperature) - term_basis(spec, role.term, reference);
    }
    ResponseEval out;
    out.temperature = temperature;
    out.reference = reference;
    out.effect = c.dot(fit.coefficients);
    out.std_err = std::sqrt(std::max(0.0, c.dot(fit.vcov * c)));
    out.n_lags_included = n_lags;
    return out;
}

double marginal_warming_rate(const FitResult& fit, double eval_temperature, double reference, Group group) {
    if (eval_temperature == reference) fail(ErrorKind::invalid_argument, "evaluation equals reference temperature");
    const auto r = response_at(fit, eval_temperature, reference, std::nullopt, group);
    return r.effect * 365.0 / (eval_temperature - reference);
}

FitResult fit_alternative_formulation(const PanelDataset& data, IncomeKind income_kind, ModelSpec base,
                                      const FitOptions& options) {
    base.form = Form::interacted_average;
    base.income_kind = income_kind;
    return fit(base, data, options);
}

MarginalEffect alternative_marginal_effect(const FitResult& fit, double mean_temperature) {
    if (fit.spec.form != Form::interacted_average) {
        fail(ErrorKind::invalid_argument, "marginal effects at average temperature need the interacted-average form");
    }
    const auto i1 = static_cast<Eigen::Index>(*fit.index_of("temp"));
    const auto i2 = static_cast<Eigen::Index>(*fit.index_of("temp_x_tbar"));
    Eigen::VectorXd c = Eigen::VectorXd::Zero(fit.coefficients.size());
    c[i1] = 1.0;
    c[i2] = mean_temperature;
    return {mean_temperature, c.dot(fit.coefficients), std::sqrt(std::max(0.0, c.dot(fit.vcov * c)))};
}

double temperature_effect(const FitResult& fit, const Eigen::VectorXd& coefficients,
                          const std::map<std::string, double>& regressors, int lag, Group group) {
    double total = 0.0;
    for (std::size_t j = 0; j < fit.layout.roles.size(); ++j) {
        const auto& role = fit.layout.roles[j];
        if (role.kind != ColumnKind::temperature || role.lag != lag || role.group != group) continue;
        const auto& term = fit.layout.temperature_terms[static_cast<std::size_t>(role.term)];
        if (term.scale != TermDef::Scale::none) {
            fail(ErrorKind::invalid_argument, "annual effects are not defined for the interacted-average form");
        }
        double value = 0.0;
        for (const auto& c : term.columns) {
            const auto it = regressors.find(c);
            if (it == regressors.end()) fail(ErrorKind::schema_violation, "regressor '" + c + "' not provided");
            value += it->second;
        }
        total += coefficients[static_cast<Eigen::Index>(j)] * value;
    }
    return total;
}

double temperature_effect(const FitResult& fit, const std::map<std::string, double>& regressors, int lag,
                          Group group) {
    return temperature_effect(fit, fit.coefficients, regressors, lag, group);
}

}  // namespace climpanel
