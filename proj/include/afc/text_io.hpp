// text_io.hpp - deterministic CSV/number formatting
//
// All artifact files must be byte-identical for a fixed seed, so every float
// goes through format_double (shortest round-trip via %.17g) and rows are
// written in a fixed order with no timestamps.
#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace afc {

// Shortest decimal representation that round-trips a double exactly.
std::string format_double(double v);

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void write_row(const std::vector<double>& values);
    void write_row_raw(const std::vector<std::string>& cells);

  private:
    std::ofstream out_;
    std::size_t n_columns_;
};

}  // namespace afc
