#pragma once

// Minimal CSV emission/ingestion with locale-independent number formatting.

#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pavsim {

/// Shortest round-trip decimal form ("nan"/"inf" for non-finite values).
std::string format_double(double value);

/// Strict locale-independent parse of a whole field; throws ValidationError.
double parse_double(std::string_view text, std::string_view context);

class CsvWriter {
public:
    CsvWriter(std::ostream& os, std::vector<std::string> header);

    void row(std::span<const double> values);
    void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }
    /// Pre-formatted fields, for rows that mix text and numbers.
    void text_row(const std::vector<std::string>& fields);

private:
    std::ostream& os_;
    std::size_t columns_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers; // 1-based source line of each row
};

/// Reads a numeric CSV whose first non-empty line is a header that must equal
/// expected_header. Errors name the offending line.
CsvTable read_numeric_csv(std::istream& is, const std::vector<std::string>& expected_header,
                          std::string_view source_name);

} // namespace pavsim
