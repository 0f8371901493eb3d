#include "nvsim/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <system_error>

namespace nvsim {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[512];
    // fixed notation: shortest digit string that round-trips through strtod
    const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::fixed);
    if (res.ec != std::errc()) throw std::runtime_error("format_double: buffer overflow");
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : n_columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

void CsvWriter::add_row(const std::vector<double>& values) {
    if (values.size() != n_columns_) throw std::invalid_argument("csv: row width mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) text_ += ',';
        text_ += format_double(values[i]);
    }
    text_ += '\n';
}

void CsvWriter::add_row_raw(const std::vector<std::string>& cells) {
    if (cells.size() != n_columns_) throw std::invalid_argument("csv: row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) text_ += ',';
        text_ += cells[i];
    }
    text_ += '\n';
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::size_t cursor = 0;
    bool first = true;
    while (cursor < text.size()) {
        std::size_t nl = text.find('\n', cursor);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(cursor, nl - cursor);
        cursor = nl + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos
                                                                          : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (first) {
            table.header = cells;
            first = false;
            continue;
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            double v = 0.0;
            const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
            if (res.ec != std::errc()) throw std::runtime_error("csv: non-numeric cell '" + c + "'");
            row.push_back(v);
        }
        if (row.size() != table.header.size()) throw std::runtime_error("csv: ragged row");
        table.rows.push_back(std::move(row));
    }
    if (first) throw std::runtime_error("csv: missing header row");
    return table;
}

}
