#ifndef NVSIM_CSV_HPP
#define NVSIM_CSV_HPP

#include <string>
#include <vector>

namespace nvsim {

// Shortest decimal representation that parses back to the same double.
// Locale independent, never produces exponents for the magnitudes we emit.
std::string format_double(double value);

// RFC-4180-style writer: comma separated, header row, LF endings.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void add_row(const std::vector<double>& values);
    void add_row_raw(const std::vector<std::string>& cells);
    const std::string& str() const { return text_; }

private:
    std::string text_;
    std::size_t n_columns_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    // column index by name, -1 if absent
    int column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);

}

#endif
