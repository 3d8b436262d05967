#include "pavsim/csv.hpp"

#include "pavsim/errors.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <system_error>

namespace pavsim {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw NumericalError("failed to format a floating-point value");
    return {buf, ptr};
}

double parse_double(std::string_view text, std::string_view context) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ValidationError(std::string(context) + ": cannot parse '" + std::string(text) + "' as a number");
    }
    return value;
}

CsvWriter::CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os), columns_(header.size()) {
    text_row(header);
}

void CsvWriter::row(std::span<const double> values) {
    if (values.size() != columns_) throw ValidationError("CSV row width does not match its header");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os_ << ',';
        os_ << format_double(values[i]);
    }
    os_ << '\n';
}

void CsvWriter::text_row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw ValidationError("CSV row width does not match its header");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) os_ << ',';
        os_ << fields[i];
    }
    os_ << '\n';
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace

CsvTable read_numeric_csv(std::istream& is, const std::vector<std::string>& expected_header,
                          std::string_view source_name) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    const std::string where(source_name);
    while (std::getline(is, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty()) continue;
        const auto fields = split_fields(content);
        if (!have_header) {
            for (auto f : fields) table.header.emplace_back(trim(f));
            if (table.header != expected_header) {
                std::string want;
                for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
                throw ValidationError(where + ":" + std::to_string(line_no) + ": expected header '" + want + "'");
            }
            have_header = true;
            continue;
        }
        if (fields.size() != expected_header.size()) {
            throw ValidationError(where + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(expected_header.size()) + " fields, found " +
                                  std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (auto f : fields) row.push_back(parse_double(f, where + ":" + std::to_string(line_no)));
        table.rows.push_back(std::move(row));
        table.line_numbers.push_back(line_no);
    }
    if (!have_header) throw ValidationError(where + ": empty CSV file");
    return table;
}

} // namespace pavsim
