#include "hetvar/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hetvar/types.hpp"

namespace hetvar::csv {

int Table::column_index(const std::string& name) const {
    for (int j = 0; j < ncol(); ++j)
        if (header[j] == name) return j;
    return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

Table read_string(const std::string& text, const std::string& origin) {
    Table t;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_line(line);
        if (t.header.empty()) {
            for (auto& c : cells) t.header.push_back(trim(c));
            continue;
        }
        if (static_cast<int>(cells.size()) != t.ncol())
            throw DataError(origin + ": row " + std::to_string(lineno) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(t.ncol()));
        std::vector<double> row(cells.size());
        for (size_t j = 0; j < cells.size(); ++j) {
            const std::string c = trim(cells[j]);
            char* end = nullptr;
            errno = 0;
            double v = std::strtod(c.c_str(), &end);
            if (c.empty() || end != c.c_str() + c.size() || errno == ERANGE)
                throw DataError(origin + ": cell at row " + std::to_string(lineno) +
                                ", column \"" + t.header[j] + "\" is not numeric: \"" + c + "\"");
            row[j] = v;
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty()) throw DataError(origin + ": empty file");
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return read_string(buf.str(), path);
}

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw DataError("cannot write " + tmp);
        for (size_t j = 0; j < header.size(); ++j)
            out << (j ? "," : "") << header[j];
        out << "\n";
        for (const auto& row : rows) {
            for (size_t j = 0; j < row.size(); ++j)
                out << (j ? "," : "") << row[j];
            out << "\n";
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move " + tmp + " to " + path);
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace hetvar::csv
