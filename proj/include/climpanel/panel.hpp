#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace climpanel {

// Province-year rows with named numeric columns (growth, regressors, sector
// outcomes, income). Rows are kept sorted by (province, year).
class PanelDataset {
  public:
    PanelDataset() = default;
    explicit PanelDataset(std::vector<std::string> column_names);

    void add_row(const std::string& province, int year, const std::string& region, bool low_income,
                 const std::vector<double>& values);
    // Sorts rows and checks (province, year) uniqueness and that the
    // low-income flag is constant within each province.
    void finalize();

    std::size_t rows() const { return years_.size(); }
    const std::vector<std::string>& column_names() const { return names_; }
    bool has_column(const std::string& name) const { return index_.contains(name); }
    const std::vector<double>& column(const std::string& name) const;
    void set_column(const std::string& name, std::vector<double> values);

    int province_index(std::size_t row) const { return province_idx_[row]; }
    const std::string& province(std::size_t row) const { return province_ids_[static_cast<std::size_t>(province_idx_[row])]; }
    int year(std::size_t row) const { return years_[row]; }
    const std::string& region(std::size_t row) const { return regions_[row]; }
    bool low_income(std::size_t row) const { return low_income_[row]; }

    const std::vector<std::string>& province_ids() const { return province_ids_; }
    std::size_t province_count() const { return province_ids_.size(); }
    std::optional<std::size_t> find_row(int province_index, int year) const;
    // Rows of one province in year order.
    std::vector<std::size_t> rows_of(int province_index) const;

    PanelDataset filter(const std::vector<bool>& keep) const;
    // Stacks the listed provinces (indices, repeats allowed). Each copy becomes
    // a distinct province labelled "<id>#<k>".
    PanelDataset resample(const std::vector<int>& province_indices) const;

    // Marks provinces whose mean of `income_column` lies below the
    // cross-province median.
    void classify_low_income(const std::string& income_column);

  private:
    void rebuild_province_index();

    std::vector<std::string> names_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::vector<double>> columns_;
    std::vector<std::string> row_provinces_;
    std::vector<int> province_idx_;
    std::vector<int> years_;
    std::vector<std::string> regions_;
    std::vector<bool> low_income_;
    std::vector<std::string> province_ids_;
    std::map<std::pair<int, int>, std::size_t> lookup_;
};

}  // namespace climpanel
