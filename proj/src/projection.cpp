#include "climpanel/projection.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "climpanel/csv.hpp"
#include "climpanel/errors.hpp"
#include "climpanel/parallel.hpp"

namespace climpanel {

namespace fs = std::filesystem;

ClimateScenario::ClimateScenario(std::string model, std::string rcp, std::vector<std::string> columns)
    : model_(std::move(model)), rcp_(std::move(rcp)), columns_(std::move(columns)) {}

void ClimateScenario::add(const std::string& province, int year, std::vector<double> values) {
    if (values.size() != columns_.size()) {
        fail(ErrorKind::schema_violation, fmt::format("climate row for {} {} has {} values, expected {}", province, year,
                                                      values.size(), columns_.size()));
    }
    if (!data_[province].emplace(year, std::move(values)).second) {
        fail(ErrorKind::uniqueness_violation,
             fmt::format("duplicate climate row {} {} in {}/{}", province, year, model_, rcp_));
    }
}

std::optional<std::size_t> ClimateScenario::column_index(const std::string& name) const {
    const auto it = std::find(columns_.begin(), columns_.end(), name);
    if (it == columns_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - columns_.begin());
}

std::vector<std::string> ClimateScenario::provinces() const {
    std::vector<std::string> out;
    for (const auto& [p, _] : data_) out.push_back(p);
    return out;
}

const std::vector<double>* ClimateScenario::find(const std::string& province, int year) const {
    const auto p = data_.find(province);
    if (p == data_.end()) return nullptr;
    const auto y = p->second.find(year);
    return y == p->second.end() ? nullptr : &y->second;
}

namespace {

int group_slot(Group g) { return static_cast<int>(g); }

void check_projectable(const DesignLayout& layout) {
    for (const auto& t : layout.temperature_terms) {
        if (t.scale != TermDef::Scale::none) {
            fail(ErrorKind::invalid_argument, "projections are not defined for the interacted-average form");
        }
    }
}

// Mean of each temperature term over panel rows of one province in a window.
std::vector<double> observed_mean(const DesignLayout& layout, const PanelDataset& data, const std::string& province,
                                  std::pair<int, int> window, const char* what) {
    const auto& ids = data.province_ids();
    const auto it = std::find(ids.begin(), ids.end(), province);
    if (it == ids.end()) fail(ErrorKind::missing_baseline, "province " + province + " is not in the panel");
    const auto rows = data.rows_of(static_cast<int>(it - ids.begin()));
    std::vector<double> mean(layout.temperature_terms.size(), 0.0);
    std::size_t n = 0;
    for (std::size_t r : rows) {
        const int y = data.year(r);
        if (y < window.first || y > window.second) continue;
        std::vector<double> v(mean.size(), 0.0);
        bool ok = true;
        for (std::size_t k = 0; k < mean.size(); ++k) {
            for (const auto& c : layout.temperature_terms[k].columns) v[k] += data.column(c)[r];
            ok = ok && std::isfinite(v[k]);
        }
        if (!ok) continue;
        for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += v[k];
        ++n;
    }
    if (n == 0) {
        fail(ErrorKind::missing_baseline, fmt::format("no observed {} climate for {} in {}-{}", what, province,
                                                      window.first, window.second));
    }
    for (auto& m : mean) m /= static_cast<double>(n);
    return mean;
}

std::vector<double> projected_terms(const DesignLayout& layout, const ClimateScenario& climate,
                                    const std::string& province, int year) {
    const auto* values = climate.find(province, year);
    if (!values) {
        fail(ErrorKind::missing_data,
             fmt::format("{}/{} has no projected climate for {} in {}", climate.model(), climate.rcp(), province, year));
    }
    std::vector<double> out(layout.temperature_terms.size(), 0.0);
    for (std::size_t k = 0; k < out.size(); ++k) {
        for (const auto& c : layout.temperature_terms[k].columns) {
            const auto idx = climate.column_index(c);
            if (!idx) fail(ErrorKind::schema_violation, "projected climate lacks column " + c);
            out[k] += (*values)[*idx];
        }
    }
    return out;
}

}  // namespace

ClimateDelta::ClimateDelta(const FitResult& fit, const ClimateScenario& climate, const PanelDataset& observed,
                           std::vector<std::string> provinces, const ProjectionOptions& options)
    : provinces_(std::move(provinces)), n_lags_(fit.spec.n_lags) {
    const auto& layout = fit.layout;
    check_projectable(layout);
    const std::size_t n_terms = layout.temperature_terms.size();
    index_.assign(3, std::vector<std::vector<Eigen::Index>>(static_cast<std::size_t>(n_lags_) + 1,
                                                            std::vector<Eigen::Index>(n_terms, -1)));
    for (std::size_t j = 0; j < layout.roles.size(); ++j) {
        const auto& role = layout.roles[j];
        if (role.kind != ColumnKind::temperature) continue;
        index_[static_cast<std::size_t>(group_slot(role.group))][static_cast<std::size_t>(role.lag)]
              [static_cast<std::size_t>(role.term)] = static_cast<Eigen::Index>(j);
    }

    first_year_ = options.first_year - n_lags_;
    const auto [b0, b1] = options.bias_window;
    for (const auto& p : provinces_) {
        baseline_.push_back(observed_mean(layout, observed, p, options.baseline_window, "baseline"));
        std::vector<std::vector<double>> years;
        for (int y = first_year_; y <= options.last_year; ++y) years.push_back(projected_terms(layout, climate, p, y));
        projected_.push_back(std::move(years));
        if (options.bias_correction) {
            observed_window_.push_back(observed_mean(layout, observed, p, options.bias_window, "bias-window"));
            std::vector<double> mean(n_terms, 0.0);
            for (int y = b0; y <= b1; ++y) {
                const auto v = projected_terms(layout, climate, p, y);
                for (std::size_t k = 0; k < n_terms; ++k) mean[k] += v[k];
            }
            for (auto& m : mean) m /= static_cast<double>(b1 - b0 + 1);
            projected_window_.push_back(std::move(mean));
        }
    }
}

double ClimateDelta::h(const Eigen::VectorXd& coefficients, int lag, Group group,
                       const std::vector<double>& terms) const {
    const auto& idx = index_[static_cast<std::size_t>(group_slot(group))][static_cast<std::size_t>(lag)];
    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] >= 0) total += coefficients[idx[k]] * terms[k];
    }
    return total;
}

const std::vector<double>& ClimateDelta::projected(std::size_t province, int year) const {
    const int offset = year - first_year_;
    const auto& years = projected_[province];
    if (offset < 0 || offset >= static_cast<int>(years.size())) {
        fail(ErrorKind::out_of_range, fmt::format("year {} is outside the projection horizon", year));
    }
    return years[static_cast<std::size_t>(offset)];
}

double ClimateDelta::delta(const Eigen::VectorXd& coefficients, std::size_t province, int year, Group group) const {
    double total = 0.0;
    for (int l = 0; l <= n_lags_; ++l) {
        total += h(coefficients, l, group, projected(province, year - l)) -
                 h(coefficients, l, group, baseline_[province]);
    }
    return total;
}

double ClimateDelta::bias(const Eigen::VectorXd& coefficients, std::size_t province, Group group) const {
    if (projected_window_.empty()) fail(ErrorKind::invalid_argument, "delta was built without bias correction");
    double total = 0.0;
    for (int l = 0; l <= n_lags_; ++l) {
        total += h(coefficients, l, group, projected_window_[province]) -
                 h(coefficients, l, group, observed_window_[province]);
    }
    return total;
}

double delta(const FitResult& fit, const ClimateScenario& climate, const PanelDataset& observed,
             const std::string& province, int year, Group group, const ProjectionOptions& options) {
    auto o = options;
    o.first_year = std::min(o.first_year, year);
    o.last_year = year;
    o.bias_correction = false;
    const ClimateDelta d(fit, climate, observed, {province}, o);
    return d.delta(fit.coefficients, 0, year, group);
}

double bias_correction(const FitResult& fit, const ClimateScenario& climate, const PanelDataset& observed,
                       const std::string& province, Group group, const ProjectionOptions& options) {
    auto o = options;
    o.bias_correction = true;
    o.first_year = o.bias_window.second;
    o.last_year = o.bias_window.second;
    const ClimateDelta d(fit, climate, observed, {province}, o);
    return d.bias(fit.coefficients, 0, group);
}

double baseline_growth(const PanelDataset& data, const std::string& province, std::pair<int, int> window,
                       const std::string& outcome) {
    const auto& ids = data.province_ids();
    const auto it = std::find(ids.begin(), ids.end(), province);
    if (it == ids.end()) fail(ErrorKind::missing_baseline, "province " + province + " is not in the panel");
    const auto& g = data.column(outcome);
    double sum = 0.0;
    int n = 0;
    for (std::size_t r : data.rows_of(static_cast<int>(it - ids.begin()))) {
        if (data.year(r) < window.first || data.year(r) > window.second || !std::isfinite(g[r])) continue;
        sum += g[r];
        ++n;
    }
    if (n == 0) {
        fail(ErrorKind::missing_baseline,
             fmt::format("no observed growth for {} in {}-{}", province, window.first, window.second));
    }
    return sum / n;
}

double ssp_annual_growth(const SspPath& path, int year) {
    const auto& pts = path.points;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
        if (year >= pts[k].first && year < pts[k + 1].first) {
            if (!(pts[k].second > 0.0) || !(pts[k + 1].second > 0.0)) {
                fail(ErrorKind::invalid_data, fmt::format("path {} has a non-positive level", path.name));
            }
            const double span = pts[k + 1].first - pts[k].first;
            return std::pow(pts[k + 1].second / pts[k].second, 1.0 / span) - 1.0;
        }
    }
    fail(ErrorKind::out_of_range, fmt::format("year {} is outside path {}", year, path.name));
}

Linkage estimate_linkage(const PanelDataset& data, std::pair<int, int> window, const std::string& outcome) {
    const auto& g = data.column(outcome);
    std::map<int, std::pair<double, int>> by_year;
    for (std::size_t r = 0; r < data.rows(); ++r) {
        if (!std::isfinite(g[r])) continue;
        auto& [sum, n] = by_year[data.year(r)];
        sum += g[r];
        ++n;
    }
    struct Obs {
        double g, lag_national;
    };
    std::vector<std::vector<Obs>> per_province(data.province_count());
    for (std::size_t r = 0; r < data.rows(); ++r) {
        const int y = data.year(r);
        if (y < window.first || y > window.second || !std::isfinite(g[r])) continue;
        const auto prev = by_year.find(y - 1);
        if (prev == by_year.end()) continue;
        per_province[static_cast<std::size_t>(data.province_index(r))].push_back(
            {g[r], prev->second.first / prev->second.second});
    }
    double sxy = 0.0, sxx = 0.0;
    std::vector<std::pair<double, double>> means(per_province.size(), {0.0, 0.0});
    for (std::size_t p = 0; p < per_province.size(); ++p) {
        const auto& obs = per_province[p];
        if (obs.empty()) fail(ErrorKind::missing_baseline, "no growth history for " + data.province_ids()[p]);
        for (const auto& o : obs) {
            means[p].first += o.g / static_cast<double>(obs.size());
            means[p].second += o.lag_national / static_cast<double>(obs.size());
        }
        for (const auto& o : obs) {
            sxy += (o.g - means[p].first) * (o.lag_national - means[p].second);
            sxx += (o.lag_national - means[p].second) * (o.lag_national - means[p].second);
        }
    }
    if (!(sxx > 0.0)) fail(ErrorKind::collinear_design, "national growth does not vary within the linkage window");
    Linkage out;
    out.slope = sxy / sxx;
    for (std::size_t p = 0; p < per_province.size(); ++p) {
        out.intercept[data.province_ids()[p]] = means[p].first - out.slope * means[p].second;
    }
    return out;
}

GrowthScenario GrowthScenario::baseline(const PanelDataset& data, std::pair<int, int> window,
                                        const std::string& outcome) {
    GrowthScenario s;
    s.name_ = "baseline";
    for (const auto& p : data.province_ids()) s.baseline_[p] = baseline_growth(data, p, window, outcome);
    return s;
}

GrowthScenario GrowthScenario::ssp(SspPath path, Linkage linkage) {
    GrowthScenario s;
    s.name_ = path.name;
    s.path_ = std::move(path);
    s.linkage_ = std::move(linkage);
    return s;
}

double GrowthScenario::growth(const std::string& province, int year) const {
    if (!path_) {
        const auto it = baseline_.find(province);
        if (it == baseline_.end()) fail(ErrorKind::missing_baseline, "no baseline growth for " + province);
        return it->second;
    }
    const auto it = linkage_.intercept.find(province);
    if (it == linkage_.intercept.end()) fail(ErrorKind::missing_baseline, "no linkage intercept for " + province);
    return it->second + linkage_.slope * 100.0 * ssp_annual_growth(*path_, year - 1);
}

ProjectionState initial_state(const FitResult& fit, const PanelDataset& data, const std::vector<std::string>& provinces,
                              const ProjectionOptions& options) {
    ProjectionState state;
    const bool interacted = fit.spec.interaction == Interaction::low_income;
    const auto& ids = data.province_ids();
    const std::vector<double>* income =
        data.has_column(fit.spec.income_column) ? &data.column(fit.spec.income_column) : nullptr;
    for (const auto& p : provinces) {
        const auto it = std::find(ids.begin(), ids.end(), p);
        if (it == ids.end()) fail(ErrorKind::missing_baseline, "province " + p + " is not in the panel");
        const auto rows = data.rows_of(static_cast<int>(it - ids.begin()));
        state.initial_group.push_back(!interacted ? Group::pooled
                                                  : (data.low_income(rows.front()) ? Group::low : Group::high));
        double level = 1.0;
        if (income) {
            for (std::size_t r : rows) {
                if (data.year(r) < options.first_year && std::isfinite((*income)[r]) && (*income)[r] > 0.0) {
                    level = (*income)[r];
                }
            }
        }
        state.initial_level.push_back(level);
    }
    return state;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double growth_factor(double g, const std::string& province, int year) {
    const double f = 1.0 + g / 100.0;
    if (!(f > 0.0)) {
        fail(ErrorKind::numerical_error, fmt::format("growth of {}% for {} in {} leaves no positive level", g,
                                                     province, year));
    }
    return f;
}

}  // namespace

std::vector<std::vector<PathPoint>> project_paths(const ClimateDelta& delta, const Eigen::VectorXd& coefficients,
                                                  const GrowthScenario& growth, const ProjectionState& state,
                                                  const ProjectionOptions& options) {
    const auto& provinces = delta.provinces();
    const std::size_t n = provinces.size();
    if (state.initial_group.size() != n || state.initial_level.size() != n) {
        fail(ErrorKind::invalid_argument, "projection state does not match the provinces");
    }
    std::vector<Group> group = state.initial_group;
    std::vector<double> with = state.initial_level, without = state.initial_level, ratio(n, 1.0);
    const bool switching = options.regime_switching && n > 0 && group.front() != Group::pooled;
    std::vector<std::vector<PathPoint>> out(n);
    for (int y = options.first_year; y <= options.last_year; ++y) {
        if (switching) {
            const auto& levels = options.switch_on_climate_levels ? with : without;
            const double median = median_of(levels);
            for (std::size_t p = 0; p < n; ++p) {
                if (levels[p] > median) group[p] = Group::high;
                if (levels[p] < median) group[p] = Group::low;
            }
        }
        for (std::size_t p = 0; p < n; ++p) {
            const double eta = growth.growth(provinces[p], y);
            double d = delta.delta(coefficients, p, y, group[p]);
            if (options.bias_correction) d -= delta.bias(coefficients, p, group[p]);
            const double g_plus = eta + d;
            const double f_with = growth_factor(g_plus, provinces[p], y);
            const double f_without = growth_factor(eta, provinces[p], y);
            with[p] *= f_with;
            without[p] *= f_without;
            ratio[p] *= f_with / f_without;
            out[p].push_back({y, g_plus, ratio[p], group[p]});
        }
    }
    return out;
}

int BootstrapResult::total_redraws() const {
    int total = 0;
    for (int r : redraws) total += r;
    return total;
}

namespace {

bool is_degenerate(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::collinear_design:
        case ErrorKind::degenerate_clustering:
        case ErrorKind::too_few_groups:
        case ErrorKind::too_few_observations:
        case ErrorKind::convergence_failure:
            return true;
        default:
            return false;
    }
}

FitResult fit_for(const ModelSpec& spec, const PanelDataset& data, bool vcov) {
    FitOptions o;
    o.compute_vcov = vcov;
    return spec.interaction == Interaction::low_income ? fit_interacted(spec, data, o) : fit(spec, data, o);
}

// One bootstrap draw: resample provinces until the fit is well defined.
std::pair<Eigen::VectorXd, int> bootstrap_draw(const PanelDataset& data, const ModelSpec& spec,
                                               const BootstrapOptions& options, std::size_t draw,
                                               Eigen::Index n_coefficients) {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32)};
    std::mt19937_64 rng(seq);
    const std::size_t n = data.province_count();
    std::uniform_int_distribution<int> pick(0, static_cast<int>(n) - 1);
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
        std::vector<int> chosen;
        if (options.resampler) {
            chosen = options.resampler(rng, n);
        } else {
            chosen.resize(n);
            for (auto& c : chosen) c = pick(rng);
        }
        try {
            auto result = fit_for(spec, data.resample(chosen), false);
            if (result.coefficients.size() != n_coefficients) {
                fail(ErrorKind::collinear_design, "resample changed the coefficient layout");
            }
            return {std::move(result.coefficients), attempt};
        } catch (const Error& e) {
            if (!is_degenerate(e.kind())) throw;
        }
    }
    fail(ErrorKind::numerical_error,
         fmt::format("bootstrap draw {} found no usable resample in {} attempts", draw, options.max_attempts));
}

template <typename Loop>
BootstrapResult run_bootstrap(const PanelDataset& data, const ModelSpec& spec, const BootstrapOptions& options,
                              Loop&& loop) {
    if (options.n_draws < 0) fail(ErrorKind::invalid_argument, "negative bootstrap draw count");
    BootstrapResult out;
    out.point = fit_for(spec, data, true);
    const auto n = static_cast<std::size_t>(options.n_draws);
    out.draws.resize(n + 1);
    out.redraws.assign(n + 1, 0);
    out.draws[0] = out.point.coefficients;
    const auto k = out.point.coefficients.size();
    loop(n, [&](std::size_t i) {
        auto [coef, redraws] = bootstrap_draw(data, spec, options, i + 1, k);
        out.draws[i + 1] = std::move(coef);
        out.redraws[i + 1] = redraws;
    });
    return out;
}

}  // namespace

BootstrapResult block_bootstrap(const PanelDataset& data, const ModelSpec& spec, const BootstrapOptions& options) {
    return run_bootstrap(data, spec, options, [](std::size_t n, auto&& fn) { parallel_for(n, fn); });
}

namespace serial {
BootstrapResult block_bootstrap(const PanelDataset& data, const ModelSpec& spec, const BootstrapOptions& options) {
    return run_bootstrap(data, spec, options, [](std::size_t n, auto&& fn) { serial_for(n, fn); });
}
}  // namespace serial

bool EnsembleReport::ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellOutcome& c) { return c.error.empty(); });
}

std::string run_file_name(const std::string& model, const std::string& growth) {
    return model + "__" + growth + ".csv";
}

EnsembleReport run_ensemble(const PanelDataset& data, std::span<const ClimateScenario> climates,
                            std::span<const GrowthScenario> growth, const EnsembleConfig& config,
                            const fs::path& out_dir) {
    EnsembleReport report;
    const auto provinces = data.province_ids();
    for (const auto& variant : config.variants) {
        std::vector<CellOutcome> cells;
        for (const auto& c : climates) {
            for (const auto& g : growth) {
                cells.push_back({variant.name, c.rcp(), c.model(), g.name(),
                                 out_dir / variant.name / c.rcp() / run_file_name(c.model(), g.name()), {}});
                fs::create_directories(cells.back().file.parent_path());
            }
        }
        std::optional<BootstrapResult> boot;
        try {
            boot = block_bootstrap(data, variant.spec, config.bootstrap);
            report.redraws[variant.name] = boot->total_redraws();
        } catch (const Error& e) {
            for (auto& c : cells) c.error = e.what();
        }
        if (boot) {
            const auto state = initial_state(boot->point, data, provinces, config.projection);
            parallel_for(cells.size(), [&](std::size_t i) {
                auto& cell = cells[i];
                try {
                    const auto& climate = climates[i / growth.size()];
                    const auto& scenario = growth[i % growth.size()];
                    const ClimateDelta delta(boot->point, climate, data, provinces, config.projection);
                    csv::AtomicWriter out(cell.file);
                    out.row({"province", "year", "model", "rcp", "growth", "draw", "g_plus", "gpp_ratio"});
                    for (std::size_t d = 0; d < boot->draws.size(); ++d) {
                        const auto paths = project_paths(delta, boot->draws[d], scenario, state, config.projection);
                        for (std::size_t p = 0; p < paths.size(); ++p) {
                            for (const auto& pt : paths[p]) {
                                out.stream() << provinces[p] << ',' << pt.year << ',' << cell.model << ','
                                             << cell.rcp << ',' << cell.growth << ',' << d << ','
                                             << csv::format_number(pt.g_plus) << ','
                                             << csv::format_number(pt.gpp_ratio) << '\n';
                            }
                        }
                    }
                    out.commit();
                } catch (const std::exception& e) {
                    cell.error = e.what();
                }
            });
        }
        report.cells.insert(report.cells.end(), cells.begin(), cells.end());
    }

    fs::create_directories(out_dir);
    csv::AtomicWriter log(out_dir / "run_log.csv");
    log.row({"variant", "rcp", "model", "growth", "status", "redraws", "message"});
    for (const auto& c : report.cells) {
        std::string message = c.error;
        std::replace(message.begin(), message.end(), ',', ';');
        const auto redraws = report.redraws.find(c.variant);
        log.row({c.variant, c.rcp, c.model, c.growth, c.error.empty() ? "ok" : "failed",
                 redraws == report.redraws.end() ? "" : std::to_string(redraws->second), message});
    }
    log.commit();
    return report;
}

}  // namespace climpanel
