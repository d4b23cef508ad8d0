#include "afc/text_io.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace afc {

std::string format_double(double v) {
    char buf[40];
    // Try increasing precision until the value round-trips; keeps files short
    // without losing exactness.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == v)
            return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), n_columns_(header.size()) {
    if (!out_)
        throw std::runtime_error("text_io: cannot open '" + path + "' for writing");
    for (std::size_t i = 0; i < header.size(); ++i)
        out_ << (i ? "," : "") << header[i];
    out_ << "\n";
}

void CsvWriter::write_row(const std::vector<double>& values) {
    if (values.size() != n_columns_)
        throw std::invalid_argument("text_io: row width does not match header");
    for (std::size_t i = 0; i < values.size(); ++i)
        out_ << (i ? "," : "") << format_double(values[i]);
    out_ << "\n";
}

void CsvWriter::write_row_raw(const std::vector<std::string>& cells) {
    if (cells.size() != n_columns_)
        throw std::invalid_argument("text_io: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i)
        out_ << (i ? "," : "") << cells[i];
    out_ << "\n";
}

}  // namespace afc
