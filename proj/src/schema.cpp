#include "climpanel/schema.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "climpanel/csv.hpp"

namespace climpanel::schema {

std::string format_edge(double value) { return fmt::format("{}", value); }

std::string poly_column(int order) { return fmt::format("temp_p{}", order); }

std::string temp_bin_column(double lower, double upper) {
    if (std::isinf(lower)) return "tbin_lt" + format_edge(upper);
    if (std::isinf(upper)) return "tbin_ge" + format_edge(lower);
    return "tbin_" + format_edge(lower) + "_" + format_edge(upper);
}

std::string precip_bin_column(int index) { return fmt::format("pbin_{}", index); }

std::string hdd_column(double threshold) { return "hdd_" + format_edge(threshold); }

std::string cdd_column(double threshold) { return "cdd_" + format_edge(threshold); }

std::optional<std::pair<double, double>> parse_temp_bin_column(std::string_view name) {
    constexpr std::string_view prefix = "tbin_";
    if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
    name.remove_prefix(prefix.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    try {
        if (name.substr(0, 2) == "lt") return std::pair{-inf, csv::parse_double(name.substr(2))};
        if (name.substr(0, 2) == "ge") return std::pair{csv::parse_double(name.substr(2)), inf};
        // The separator is the first '_' that is not a sign position.
        for (std::size_t i = 1; i < name.size(); ++i) {
            if (name[i] == '_') {
                return std::pair{csv::parse_double(name.substr(0, i)), csv::parse_double(name.substr(i + 1))};
            }
        }
    } catch (...) {
        return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace climpanel::schema
