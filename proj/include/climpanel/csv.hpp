#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace climpanel::csv {

// Minimal reader for the comma-separated, unquoted files this tool exchanges.
class Reader {
  public:
    explicit Reader(const std::filesystem::path& path);

    const std::vector<std::string>& header() const { return header_; }
    const std::filesystem::path& path() const { return path_; }

    // Index of a header column, or nullopt.
    std::optional<std::size_t> find(std::string_view name) const;
    // Index of a required header column; throws SchemaViolation naming the file.
    std::size_t require(std::string_view name) const;

    // Advances to the next non-empty record. Fields stay valid until the next call.
    bool next();
    const std::vector<std::string_view>& fields() const { return fields_; }
    std::string_view field(std::size_t i) const { return fields_[i]; }
    std::size_t line_number() const { return line_no_; }

    double number(std::size_t i) const;
    long integer(std::size_t i) const;
    std::string where() const;

  private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::string line_;
    std::vector<std::string> header_;
    std::vector<std::string_view> fields_;
    std::size_t line_no_ = 0;
};

std::vector<std::string_view> split(std::string_view line, char sep = ',');

double parse_double(std::string_view text);
long parse_long(std::string_view text);

// Shortest round-trip representation; NaN is written as an empty field.
std::string format_number(double value);

// Buffers output and commits it with a temp-file rename.
class AtomicWriter {
  public:
    explicit AtomicWriter(std::filesystem::path path);
    ~AtomicWriter();
    AtomicWriter(const AtomicWriter&) = delete;
    AtomicWriter& operator=(const AtomicWriter&) = delete;

    std::ostream& stream() { return out_; }
    void row(const std::vector<std::string>& fields);
    void commit();

  private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

}  // namespace climpanel::csv
