#include "climpanel/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "climpanel/csv.hpp"
#include "climpanel/errors.hpp"

namespace climpanel {

namespace fs = std::filesystem;

PopulationShares::PopulationShares(std::vector<ProvincePopulation> provinces) : provinces_(std::move(provinces)) {
    if (provinces_.empty()) fail(ErrorKind::invalid_data, "population shares are empty");
    for (std::size_t i = 0; i < provinces_.size(); ++i) {
        const auto& p = provinces_[i];
        if (!(p.population > 0.0) || !std::isfinite(p.population)) {
            fail(ErrorKind::invalid_data, "population of " + p.province + " must be positive");
        }
        if (!(p.level_2022 > 0.0) || !std::isfinite(p.level_2022)) {
            fail(ErrorKind::invalid_data, "base-year level of " + p.province + " must be positive");
        }
        if (!index_.emplace(p.province, i).second) {
            fail(ErrorKind::uniqueness_violation, "province " + p.province + " listed twice in population shares");
        }
        region_total_[p.region] += p.population;
        total_ += p.population;
    }
}

const ProvincePopulation& PopulationShares::get(const std::string& province) const {
    const auto it = index_.find(province);
    if (it == index_.end()) fail(ErrorKind::missing_data, "no population share for " + province);
    return provinces_[it->second];
}

std::vector<std::string> PopulationShares::regions() const {
    std::vector<std::string> out;
    for (const auto& [r, _] : region_total_) out.push_back(r);
    return out;
}

const std::string& PopulationShares::region_of(const std::string& province) const { return get(province).region; }

double PopulationShares::national_share(const std::string& province) const {
    return get(province).population / total_;
}

double PopulationShares::regional_share(const std::string& province) const {
    const auto& p = get(province);
    return p.population / region_total_.at(p.region);
}

double PopulationShares::base_level(const std::string& province) const { return get(province).level_2022; }

namespace {

double weighted_ratio(const CellLevels& cell, const PopulationShares& shares, const std::string* region) {
    double with = 0.0, without = 0.0;
    std::vector<std::string> missing;
    for (const auto& p : shares.provinces()) {
        if (region && p.region != *region) continue;
        const auto it = cell.find(p.province);
        if (it == cell.end()) {
            missing.push_back(p.province);
            continue;
        }
        const double w = region ? shares.regional_share(p.province) : shares.national_share(p.province);
        with += w * p.level_2022 * it->second.with_climate;
        without += w * p.level_2022 * it->second.without_climate;
    }
    if (!missing.empty()) {
        fail(ErrorKind::incomplete_region, fmt::format("{} lacks projections for {}", region ? *region : "nation",
                                                       fmt::join(missing, " ")));
    }
    if (!(without > 0.0)) fail(ErrorKind::invalid_data, "aggregate level without climate change is not positive");
    return with / without;
}

}  // namespace

double grp_ratio(const CellLevels& cell, const PopulationShares& shares, const std::string& region) {
    const auto regions = shares.regions();
    if (std::find(regions.begin(), regions.end(), region) == regions.end()) {
        fail(ErrorKind::missing_data, "unknown region " + region);
    }
    return weighted_ratio(cell, shares, &region);
}

double gdp_ratio(const CellLevels& cell, const PopulationShares& shares) {
    return weighted_ratio(cell, shares, nullptr);
}

double percentile(std::span<const double> values, double q) {
    if (values.empty()) fail(ErrorKind::invalid_argument, "percentile of an empty sample");
    if (!(q >= 0.0 && q <= 100.0)) fail(ErrorKind::invalid_argument, "percentile outside [0, 100]");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ImpactSummary summarize(std::span<const double> ratios) {
    ImpactSummary s;
    std::vector<double> change(ratios.begin(), ratios.end());
    for (auto& c : change) c -= 1.0;
    s.p5 = percentile(change, 5);
    s.p50 = percentile(change, 50);
    s.p95 = percentile(change, 95);
    std::size_t pos = 0, nonneg = 0;
    for (double r : ratios) {
        pos += r > 1.0;
        nonneg += r >= 1.0;
    }
    s.n_cells = ratios.size();
    s.prob_positive = static_cast<double>(pos) / static_cast<double>(s.n_cells);
    s.prob_nonnegative = static_cast<double>(nonneg) / static_cast<double>(s.n_cells);
    return s;
}

double share_population_negative(std::span<const std::map<std::string, double>> province_ratios,
                                 const PopulationShares& shares) {
    std::vector<double> per_cell;
    for (const auto& cell : province_ratios) {
        double share = 0.0;
        for (const auto& [p, r] : cell) {
            if (r < 1.0) share += shares.national_share(p);
        }
        per_cell.push_back(share);
    }
    return percentile(per_cell, 50);
}

namespace {

struct RunGroup {
    std::string variant, rcp, growth;
    std::vector<fs::path> files;
};

std::map<std::tuple<std::string, std::string, std::string>, RunGroup> discover(const fs::path& runs) {
    if (!fs::is_directory(runs)) fail(ErrorKind::io_error, "run store " + runs.string() + " is not a directory");
    std::map<std::tuple<std::string, std::string, std::string>, RunGroup> groups;
    for (const auto& entry : fs::recursive_directory_iterator(runs)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        const auto rel = fs::relative(entry.path(), runs);
        std::vector<std::string> parts;
        for (const auto& part : rel) parts.push_back(part.string());
        if (parts.size() != 3) continue;  // run_log.csv and anything else outside the layout
        const auto stem = entry.path().stem().string();
        const auto sep = stem.rfind("__");
        if (sep == std::string::npos) continue;
        const auto key = std::make_tuple(parts[0], parts[1], stem.substr(sep + 2));
        auto& g = groups[key];
        g.variant = parts[0];
        g.rcp = parts[1];
        g.growth = stem.substr(sep + 2);
        g.files.push_back(entry.path());
    }
    for (auto& [_, g] : groups) std::sort(g.files.begin(), g.files.end());
    return groups;
}

struct FileScan {
    int first_year = 0;
    int last_year = 0;
    std::set<long> draws;
};

FileScan scan(const fs::path& file) {
    csv::Reader in(file);
    const auto year = in.require("year");
    const auto draw = in.require("draw");
    FileScan s;
    s.first_year = std::numeric_limits<int>::max();
    s.last_year = std::numeric_limits<int>::min();
    while (in.next()) {
        const int y = static_cast<int>(in.integer(year));
        s.first_year = std::min(s.first_year, y);
        s.last_year = std::max(s.last_year, y);
        s.draws.insert(in.integer(draw));
    }
    if (s.draws.empty()) fail(ErrorKind::missing_data, "run file " + file.string() + " is empty");
    return s;
}

// Statistics of one scope unit in one year, one value per cell.
struct YearAccumulator {
    std::vector<std::vector<double>> gpp;  // [province]
    std::vector<std::vector<double>> grp;  // [region]
    std::vector<double> gdp;
    std::vector<double> negative_share;
};

class GroupReducer {
  public:
    GroupReducer(const PopulationShares& shares, int y0, int y1)
        : shares_(shares), y0_(y0), y1_(y1), regions_(shares.regions()) {
        const auto n_years = static_cast<std::size_t>(y1 - y0 + 1);
        acc_.resize(n_years);
        for (auto& a : acc_) {
            a.gpp.resize(shares.provinces().size());
            a.grp.resize(regions_.size());
        }
        for (std::size_t p = 0; p < shares.provinces().size(); ++p) province_index_[shares.provinces()[p].province] = p;
        reset();
    }

    void reset() {
        const std::size_t n = (static_cast<std::size_t>(y1_ - y0_) + 1) * shares_.provinces().size();
        with_.assign(n, std::numeric_limits<double>::quiet_NaN());
        without_.assign(n, std::numeric_limits<double>::quiet_NaN());
        ratio_.assign(n, std::numeric_limits<double>::quiet_NaN());
        used_ = false;
    }

    std::optional<std::size_t> province(std::string_view id) const {
        const auto it = province_index_.find(std::string(id));
        if (it == province_index_.end()) return std::nullopt;
        return it->second;
    }

    void put(std::size_t province, int year, double with, double without, double ratio) {
        if (year < y0_ || year > y1_) return;
        const auto i = static_cast<std::size_t>(year - y0_) * shares_.provinces().size() + province;
        with_[i] = with;
        without_[i] = without;
        ratio_[i] = ratio;
        used_ = true;
    }

    // Closes the current cell and folds it into the per-year statistics.
    void flush(const std::string& where) {
        if (!used_) return;
        const auto& provs = shares_.provinces();
        for (int y = y0_; y <= y1_; ++y) {
            auto& a = acc_[static_cast<std::size_t>(y - y0_)];
            CellLevels cell;
            double negative = 0.0;
            for (std::size_t p = 0; p < provs.size(); ++p) {
                const auto i = static_cast<std::size_t>(y - y0_) * provs.size() + p;
                if (std::isnan(ratio_[i])) continue;
                cell[provs[p].province] = {with_[i], without_[i]};
                a.gpp[p].push_back(ratio_[i]);
                if (ratio_[i] < 1.0) negative += shares_.national_share(provs[p].province);
            }
            if (cell.size() != provs.size()) {
                std::vector<std::string> missing;
                for (const auto& p : provs) {
                    if (!cell.contains(p.province)) missing.push_back(p.province);
                }
                fail(ErrorKind::incomplete_region,
                     fmt::format("{} year {} lacks projections for {}", where, y, fmt::join(missing, " ")));
            }
            for (std::size_t r = 0; r < regions_.size(); ++r) a.grp[r].push_back(grp_ratio(cell, shares_, regions_[r]));
            a.gdp.push_back(gdp_ratio(cell, shares_));
            a.negative_share.push_back(negative);
        }
        reset();
    }

    void write(csv::AtomicWriter& out, const RunGroup& g) const {
        const auto row = [&](const char* scope, const std::string& unit, int year, const std::vector<double>& values,
                             std::string negative) {
            if (values.empty()) return;
            const auto s = summarize(values);
            out.row({scope, unit, g.variant, g.rcp, g.growth, std::to_string(year), csv::format_number(s.p5),
                     csv::format_number(s.p50), csv::format_number(s.p95), csv::format_number(s.prob_positive),
                     csv::format_number(s.prob_nonnegative), std::move(negative), std::to_string(s.n_cells)});
        };
        for (int y = y0_; y <= y1_; ++y) {
            const auto& a = acc_[static_cast<std::size_t>(y - y0_)];
            if (a.gdp.empty()) continue;
            row("gdp", "nation", y, a.gdp, csv::format_number(percentile(a.negative_share, 50)));
        }
        for (std::size_t r = 0; r < regions_.size(); ++r) {
            for (int y = y0_; y <= y1_; ++y) row("grp", regions_[r], y, acc_[static_cast<std::size_t>(y - y0_)].grp[r], "");
        }
        for (std::size_t p = 0; p < shares_.provinces().size(); ++p) {
            for (int y = y0_; y <= y1_; ++y) {
                row("gpp", shares_.provinces()[p].province, y, acc_[static_cast<std::size_t>(y - y0_)].gpp[p], "");
            }
        }
    }

  private:
    const PopulationShares& shares_;
    int y0_, y1_;
    std::vector<std::string> regions_;
    std::unordered_map<std::string, std::size_t> province_index_;
    std::vector<YearAccumulator> acc_;
    std::vector<double> with_, without_, ratio_;
    bool used_ = false;
};

void reduce_file(const fs::path& file, GroupReducer& reducer, bool include_point) {
    csv::Reader in(file);
    const auto c_prov = in.require("province");
    const auto c_year = in.require("year");
    const auto c_draw = in.require("draw");
    const auto c_g = in.require("g_plus");
    const auto c_ratio = in.require("gpp_ratio");
    long draw = -1;
    std::string prov;
    int prev_year = 0;
    double level = 1.0;
    std::optional<std::size_t> p_idx;
    while (in.next()) {
        const long d = in.integer(c_draw);
        const auto pv = in.field(c_prov);
        const int y = static_cast<int>(in.integer(c_year));
        if (d != draw) {
            reducer.flush(file.string());
            draw = d;
            prov.clear();
        }
        if (pv != prov) {
            prov = std::string(pv);
            p_idx = reducer.province(prov);
            if (!p_idx) fail(ErrorKind::schema_violation, in.where() + ": province " + prov + " has no population share");
            level = 1.0;
        } else if (y != prev_year + 1) {
            fail(ErrorKind::invalid_data, in.where() + ": years of a path must be consecutive");
        }
        prev_year = y;
        const double g = in.number(c_g);
        const double ratio = in.number(c_ratio);
        level *= 1.0 + g / 100.0;
        if (!(level > 0.0) || !(ratio > 0.0)) fail(ErrorKind::numerical_error, in.where() + ": non-positive level");
        if (d == 0 && !include_point) continue;
        reducer.put(*p_idx, y, level, level / ratio, ratio);
    }
    reducer.flush(file.string());
}

}  // namespace

void write_report(const fs::path& runs, const PopulationShares& shares, const fs::path& out_csv,
                  const ReportOptions& options) {
    const auto groups = discover(runs);
    if (groups.empty()) fail(ErrorKind::missing_data, "no run files under " + runs.string());
    csv::AtomicWriter out(out_csv);
    out.row({"scope", "unit", "variant", "rcp", "growth", "year", "p5", "p50", "p95", "prob_positive",
             "prob_nonnegative", "share_pop_negative", "n_cells"});
    constexpr double budget_bytes = 256.0 * 1024 * 1024;
    for (const auto& [_, g] : groups) {
        const auto first = scan(g.files.front());
        const bool include_point = options.include_point_draw || first.draws.size() == 1;
        const double cells = static_cast<double>(g.files.size()) *
                             static_cast<double>(first.draws.size() - (include_point ? 0 : 1));
        const double per_year = cells * static_cast<double>(shares.provinces().size() + shares.regions().size() + 2) * 8;
        const int block = std::max(1, static_cast<int>(budget_bytes / std::max(per_year, 1.0)));
        for (int y0 = first.first_year; y0 <= first.last_year; y0 += block) {
            const int y1 = std::min(first.last_year, y0 + block - 1);
            GroupReducer reducer(shares, y0, y1);
            for (const auto& f : g.files) reduce_file(f, reducer, include_point);
            reducer.write(out, g);
        }
    }
    out.commit();
}

}  // namespace climpanel
