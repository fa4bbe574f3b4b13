#include "climpanel/csv.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "climpanel/errors.hpp"

namespace climpanel::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view text) {
    text = trim(text);
    if (text.empty() || text == "NA" || text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(ErrorKind::invalid_data, "not a number: '" + std::string(text) + "'");
    }
    return value;
}

long parse_long(std::string_view text) {
    text = trim(text);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(ErrorKind::invalid_data, "not an integer: '" + std::string(text) + "'");
    }
    return value;
}

std::string format_number(double value) {
    if (std::isnan(value)) return {};
    return fmt::format("{}", value);
}

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) fail(ErrorKind::io_error, "cannot open " + path.string());
    if (!std::getline(in_, line_)) fail(ErrorKind::schema_violation, path.string() + ": missing header");
    line_no_ = 1;
    if (line_.size() >= 3 && line_.compare(0, 3, "\xEF\xBB\xBF") == 0) line_.erase(0, 3);
    for (auto f : split(line_)) header_.emplace_back(f);
}

std::optional<std::size_t> Reader::find(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t Reader::require(std::string_view name) const {
    if (auto i = find(name)) return *i;
    fail(ErrorKind::schema_violation, path_.string() + ": missing column '" + std::string(name) + "'");
}

bool Reader::next() {
    while (std::getline(in_, line_)) {
        ++line_no_;
        if (trim(line_).empty()) continue;
        fields_ = split(line_);
        if (fields_.size() != header_.size()) {
            fail(ErrorKind::schema_violation,
                 where() + ": expected " + std::to_string(header_.size()) + " fields, got " + std::to_string(fields_.size()));
        }
        return true;
    }
    return false;
}

std::string Reader::where() const { return path_.string() + ":" + std::to_string(line_no_); }

double Reader::number(std::size_t i) const {
    try {
        return parse_double(fields_[i]);
    } catch (const Error& e) {
        fail(ErrorKind::invalid_data, where() + ": column '" + header_[i] + "': " + e.what());
    }
}

long Reader::integer(std::size_t i) const {
    try {
        return parse_long(fields_[i]);
    } catch (const Error& e) {
        fail(ErrorKind::invalid_data, where() + ": column '" + header_[i] + "': " + e.what());
    }
}

AtomicWriter::AtomicWriter(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    tmp_ = path_;
    tmp_ += ".tmp";
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) fail(ErrorKind::io_error, "cannot write " + tmp_.string());
}

AtomicWriter::~AtomicWriter() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        std::filesystem::remove(tmp_, ec);
    }
}

void AtomicWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

void AtomicWriter::commit() {
    out_.close();
    if (!out_) fail(ErrorKind::io_error, "write failed for " + tmp_.string());
    std::filesystem::rename(tmp_, path_);
    committed_ = true;
}

}  // namespace climpanel::csv
