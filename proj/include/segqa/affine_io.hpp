#ifndef SEGQA_AFFINE_IO_HPP
#define SEGQA_AFFINE_IO_HPP

// Plain-text 4x4 affine matrices: four lines of four whitespace-separated numbers.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "segqa/error.hpp"
#include "segqa/grid.hpp"

namespace segqa {

inline AffineTransform parse_affine(const std::string& text) {
    std::istringstream lines(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    while (std::getline(lines, line)) {
        std::istringstream tokens(line);
        std::string token;
        std::vector<double> row;
        while (tokens >> token) {
            double value = 0.0;
            const char* first = token.data();
            const char* last = token.data() + token.size();
            if (*first == '+') ++first;
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc() || ptr != last) throw FormatError("affine: non-numeric token '" + token + "'");
            row.push_back(value);
        }
        if (row.empty()) continue;
        if (row.size() != 4) {
            throw FormatError("affine: expected 4 columns, found " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() != 4) throw FormatError("affine: expected 4 rows, found " + std::to_string(rows.size()));
    Matrix4 m{};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m[r][c] = rows[r][c];
    }
    return AffineTransform(m);
}

inline AffineTransform read_affine(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open affine file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_affine(buf.str());
}

inline std::string format_affine(const AffineTransform& t) {
    std::string out;
    char cell[32];
    for (const auto& row : t.matrix()) {
        for (int c = 0; c < 4; ++c) {
            std::snprintf(cell, sizeof(cell), "%.17g", row[c]);
            out += cell;
            out += c == 3 ? '\n' : ' ';
        }
    }
    return out;
}

inline void write_affine(const AffineTransform& t, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot create affine file " + path.string());
    out << format_affine(t);
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace segqa

#endif  // SEGQA_AFFINE_IO_HPP
