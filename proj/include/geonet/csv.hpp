#pragma once

// Minimal CSV reading for the flat numeric files used by the toolkit.
// No quoting support: fields never contain commas.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "geonet/errors.hpp"

namespace geonet::csv {

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
        while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
        out.emplace_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double to_double(const std::string& field, std::size_t line, const char* column) {
    double value = 0.0;
    auto first = field.data();
    auto last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw data_error(std::string("column '") + column + "': not a number: '" + field + "'", line);
    return value;
}

inline long long to_int(const std::string& field, std::size_t line, const char* column) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw data_error(std::string("column '") + column + "': not an integer: '" + field + "'", line);
    return value;
}

// Reads a CSV with the exact expected header and calls row(fields, line_number)
// for every non-empty data row.
template <class RowFn>
void read(std::istream& in, const std::vector<std::string>& header, RowFn&& row) {
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto fields = split(line);
        if (!saw_header) {
            if (line_no == 1 && fields.size() > 0 && fields[0].rfind("\xEF\xBB\xBF", 0) == 0)
                fields[0].erase(0, 3);
            if (fields != header) {
                std::string expected;
                for (const auto& h : header) expected += (expected.empty() ? "" : ",") + h;
                throw data_error("unexpected header, want '" + expected + "'", line_no);
            }
            saw_header = true;
            continue;
        }
        if (fields.size() != header.size())
            throw data_error("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        row(fields, line_no);
    }
    if (!saw_header) throw data_error("missing header");
}

template <class RowFn>
void read_file(const std::string& path, const std::vector<std::string>& header, RowFn&& row) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    read(in, header, std::forward<RowFn>(row));
}

}  // namespace geonet::csv
