#ifndef HETVAR_CSV_HPP
#define HETVAR_CSV_HPP

#include <string>
#include <vector>

namespace hetvar::csv {

/// A rectangular table of doubles with a header row. Cells must parse as
/// decimal numbers; anything else is rejected with the offending row/column.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int ncol() const { return static_cast<int>(header.size()); }
    int nrow() const { return static_cast<int>(rows.size()); }
    int column_index(const std::string& name) const;  // -1 if absent
};

Table read_file(const std::string& path);
Table read_string(const std::string& text, const std::string& origin = "<string>");

/// Writes rows of preformatted cells; parent directory must exist.
/// The file is written to a temporary sibling and renamed into place.
void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

}  // namespace hetvar::csv

#endif
