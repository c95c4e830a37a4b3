#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "berry/errors.hpp"

namespace berry {

// Shortest round-trip decimal representation; identical input bits give
// identical text, which keeps CSV outputs byte-reproducible.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    // Prefer the shorter %.15g / %.16g form when it round-trips.
    for (int prec = 15; prec <= 16; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, x);
        double back = 0.0;
        std::sscanf(shorter, "%lf", &back);
        if (back == x) return shorter;
    }
    return buf;
}

class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& header_comment,
              const std::vector<std::string>& columns)
        : out_(path) {
        if (!out_) throw ConfigError("cannot open for writing: " + path);
        if (!header_comment.empty()) out_ << "# " << header_comment << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i)
            out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
    }

  private:
    std::ofstream out_;
};

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw ConfigError("CSV column not found: " + name);
    }
    double num(std::size_t r, const std::string& name) const {
        return std::stod(rows.at(r).at(static_cast<std::size_t>(col(name))));
    }
    const std::string& str(std::size_t r, const std::string& name) const {
        return rows.at(r).at(static_cast<std::size_t>(col(name)));
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV: " + path);
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!have_header) {
            t.columns = cells;
            have_header = true;
        } else {
            t.rows.push_back(cells);
        }
    }
    return t;
}

} // namespace berry
