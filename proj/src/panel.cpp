#include "climpanel/panel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "climpanel/errors.hpp"

namespace climpanel {

PanelDataset::PanelDataset(std::vector<std::string> column_names) : names_(std::move(column_names)) {
    columns_.resize(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!index_.emplace(names_[i], i).second) fail(ErrorKind::schema_violation, "duplicate column " + names_[i]);
    }
}

void PanelDataset::add_row(const std::string& province, int year, const std::string& region, bool low_income,
                           const std::vector<double>& values) {
    if (values.size() != names_.size()) fail(ErrorKind::schema_violation, "row width does not match panel columns");
    row_provinces_.push_back(province);
    years_.push_back(year);
    regions_.push_back(region);
    low_income_.push_back(low_income);
    for (std::size_t i = 0; i < values.size(); ++i) columns_[i].push_back(values[i]);
}

void PanelDataset::finalize() {
    std::vector<std::size_t> order(years_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (row_provinces_[a] != row_provinces_[b]) return row_provinces_[a] < row_provinces_[b];
        return years_[a] < years_[b];
    });
    auto permute = [&](auto& v) {
        auto copy = v;
        for (std::size_t i = 0; i < order.size(); ++i) v[i] = copy[order[i]];
    };
    permute(row_provinces_);
    permute(years_);
    permute(regions_);
    permute(low_income_);
    for (auto& c : columns_) permute(c);

    for (std::size_t i = 1; i < years_.size(); ++i) {
        if (row_provinces_[i] == row_provinces_[i - 1] && years_[i] == years_[i - 1]) {
            fail(ErrorKind::uniqueness_violation,
                 fmt::format("duplicate row for province '{}' year {}", row_provinces_[i], years_[i]));
        }
        if (row_provinces_[i] == row_provinces_[i - 1] && low_income_[i] != low_income_[i - 1]) {
            fail(ErrorKind::invalid_data,
                 fmt::format("low_income flag changes within province '{}'", row_provinces_[i]));
        }
    }
    rebuild_province_index();
}

void PanelDataset::rebuild_province_index() {
    province_ids_.clear();
    province_idx_.assign(years_.size(), -1);
    lookup_.clear();
    for (std::size_t i = 0; i < years_.size(); ++i) {
        if (province_ids_.empty() || province_ids_.back() != row_provinces_[i]) province_ids_.push_back(row_provinces_[i]);
        province_idx_[i] = static_cast<int>(province_ids_.size()) - 1;
        lookup_[{province_idx_[i], years_[i]}] = i;
    }
}

const std::vector<double>& PanelDataset::column(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::schema_violation, "panel has no column '" + name + "'");
    return columns_[it->second];
}

void PanelDataset::set_column(const std::string& name, std::vector<double> values) {
    if (values.size() != years_.size()) fail(ErrorKind::schema_violation, "column length mismatch for " + name);
    const auto it = index_.find(name);
    if (it != index_.end()) {
        columns_[it->second] = std::move(values);
        return;
    }
    index_.emplace(name, names_.size());
    names_.push_back(name);
    columns_.push_back(std::move(values));
}

std::optional<std::size_t> PanelDataset::find_row(int province_index, int year) const {
    const auto it = lookup_.find({province_index, year});
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::size_t> PanelDataset::rows_of(int province_index) const {
    std::vector<std::size_t> out;
    const auto lo = std::lower_bound(province_idx_.begin(), province_idx_.end(), province_index);
    for (auto it = lo; it != province_idx_.end() && *it == province_index; ++it) {
        out.push_back(static_cast<std::size_t>(it - province_idx_.begin()));
    }
    return out;
}

PanelDataset PanelDataset::filter(const std::vector<bool>& keep) const {
    PanelDataset out(names_);
    std::vector<double> values(names_.size());
    for (std::size_t r = 0; r < years_.size(); ++r) {
        if (!keep[r]) continue;
        for (std::size_t c = 0; c < names_.size(); ++c) values[c] = columns_[c][r];
        out.add_row(row_provinces_[r], years_[r], regions_[r], low_income_[r], values);
    }
    out.finalize();
    return out;
}

PanelDataset PanelDataset::resample(const std::vector<int>& province_indices) const {
    PanelDataset out(names_);
    std::vector<int> copies(province_ids_.size(), 0);
    std::vector<double> values(names_.size());
    for (int p : province_indices) {
        const int k = copies[static_cast<std::size_t>(p)]++;
        const std::string label = fmt::format("{}#{}", province_ids_[static_cast<std::size_t>(p)], k);
        for (std::size_t r : rows_of(p)) {
            for (std::size_t c = 0; c < names_.size(); ++c) values[c] = columns_[c][r];
            out.add_row(label, years_[r], regions_[r], low_income_[r], values);
        }
    }
    out.finalize();
    return out;
}

void PanelDataset::classify_low_income(const std::string& income_column) {
    const auto& income = column(income_column);
    std::vector<double> means(province_ids_.size(), 0.0);
    std::vector<int> counts(province_ids_.size(), 0);
    for (std::size_t r = 0; r < years_.size(); ++r) {
        if (!std::isfinite(income[r])) continue;
        means[static_cast<std::size_t>(province_idx_[r])] += income[r];
        ++counts[static_cast<std::size_t>(province_idx_[r])];
    }
    for (std::size_t p = 0; p < means.size(); ++p) {
        if (counts[p] == 0) fail(ErrorKind::invalid_data, "no income data for province " + province_ids_[p]);
        means[p] /= counts[p];
    }
    auto sorted = means;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (std::size_t r = 0; r < years_.size(); ++r) {
        low_income_[r] = means[static_cast<std::size_t>(province_idx_[r])] < median;
    }
}

}  // namespace climpanel
