#pragma once

// Column naming shared by the aggregation output, the panel file and the
// projected-climate files.

#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace climpanel::schema {

inline constexpr std::string_view province = "province_id";
inline constexpr std::string_view year = "year";
inline constexpr std::string_view region = "region_id";
inline constexpr std::string_view low_income = "low_income";
inline constexpr std::string_view growth = "growth";
inline constexpr std::string_view income = "gpp_pc";
inline constexpr std::string_view precip_linear = "prcp";
inline constexpr std::string_view precip_sq = "prcp2";

// temp_p<m>: annual sum of the day-averaged m-th power of hourly temperature.
std::string poly_column(int order);
// tbin_lt<a>, tbin_<a>_<b>, tbin_ge<b>: fractional days in [a, b).
std::string temp_bin_column(double lower, double upper);
// pbin_<k>, 1-based, bottom bin is dry days.
std::string precip_bin_column(int index);
std::string hdd_column(double threshold);
std::string cdd_column(double threshold);

// Interval [lower, upper) encoded by a temperature-bin column name; infinite
// bounds for the open tail bins.
std::optional<std::pair<double, double>> parse_temp_bin_column(std::string_view name);

std::string format_edge(double value);

}  // namespace climpanel::schema
