#ifndef SEGQA_FEATURE_CSV_HPP
#define SEGQA_FEATURE_CSV_HPP

// Feature tables: `subject,<20 feature columns>[,dice_<tissue> x5]`.
// Dice columns are present when any row carries targets; rows without
// targets leave those cells empty.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "segqa/error.hpp"
#include "segqa/features.hpp"

namespace segqa {

namespace csv {

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline double parse_number(const std::string& cell, std::size_t line, const std::string& column) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc() || ptr != last) {
        throw FormatError("CSV line " + std::to_string(line) + ", column '" + column + "': not a number: '" +
                          cell + "'");
    }
    return value;
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline void check_id(const std::string& id) {
    if (id.find_first_of(",\"\r\n") != std::string::npos) {
        throw ValidationError("subject id '" + id + "' cannot be written to CSV (contains , \" or newline)");
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << text;
    if (!out) throw IoError("write failure on " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace csv

inline std::vector<std::string> dice_column_names(const std::string& prefix = "dice_") {
    std::vector<std::string> cols;
    for (TissueClass t : kScoredTissues) cols.push_back(prefix + std::string(tissue_name(t)));
    return cols;
}

inline std::string format_feature_csv(const std::vector<SubjectFeatures>& rows) {
    bool with_dice = false;
    for (const auto& r : rows) with_dice = with_dice || r.targets.has_value();

    std::string out = "subject";
    for (const auto& name : feature_names()) out += "," + name;
    if (with_dice) {
        for (const auto& name : dice_column_names()) out += "," + name;
    }
    out += "\n";
    for (const auto& r : rows) {
        csv::check_id(r.id);
        out += r.id;
        for (std::size_t i = 0; i < kFeatureCount; ++i) out += "," + csv::format_number(r.features[i]);
        if (with_dice) {
            for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
                out += ",";
                if (r.targets) out += csv::format_number(r.targets->values[t]);
            }
        }
        out += "\n";
    }
    return out;
}

inline void write_feature_csv(const std::vector<SubjectFeatures>& rows, const std::filesystem::path& path) {
    csv::write_text(path, format_feature_csv(rows));
}

inline std::vector<SubjectFeatures> parse_feature_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("feature CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = csv::split(line);

    std::vector<std::string> expected = {"subject"};
    for (const auto& name : feature_names()) expected.push_back(name);
    const auto dice_cols = dice_column_names();
    bool with_dice = false;
    if (header.size() == expected.size() + dice_cols.size()) {
        with_dice = true;
        expected.insert(expected.end(), dice_cols.begin(), dice_cols.end());
    }
    if (header != expected) throw FormatError("feature CSV header does not match the 20-feature schema");

    std::vector<SubjectFeatures> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != header.size()) {
            throw FormatError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                              " cells, expected " + std::to_string(header.size()));
        }
        SubjectFeatures r;
        r.id = cells[0];
        if (r.id.empty()) throw FormatError("CSV line " + std::to_string(line_no) + " has an empty subject id");
        for (std::size_t i = 0; i < kFeatureCount; ++i) r.features[i] = csv::parse_number(cells[1 + i], line_no, header[1 + i]);
        if (with_dice) {
            std::size_t filled = 0;
            DiceScores d;
            for (std::size_t t = 0; t < kScoredTissueCount; ++t) {
                const std::size_t c = 1 + kFeatureCount + t;
                if (cells[c].empty()) continue;
                d.values[t] = csv::parse_number(cells[c], line_no, header[c]);
                ++filled;
            }
            if (filled == kScoredTissueCount) {
                validate(d);
                r.targets = d;
            } else if (filled != 0) {
                throw FormatError("CSV line " + std::to_string(line_no) + " has a partial set of Dice cells");
            }
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<SubjectFeatures> read_feature_csv(const std::filesystem::path& path) {
    return parse_feature_csv(csv::read_text(path));
}

struct SubjectPrediction {
    std::string id;
    DiceScores predicted;
};

inline std::string format_prediction_csv(const std::vector<SubjectPrediction>& rows) {
    std::string out = "subject";
    for (const auto& name : dice_column_names("pred_dice_")) out += "," + name;
    out += "\n";
    for (const auto& r : rows) {
        csv::check_id(r.id);
        out += r.id;
        for (double v : r.predicted.values) out += "," + csv::format_number(v);
        out += "\n";
    }
    return out;
}

inline void write_prediction_csv(const std::vector<SubjectPrediction>& rows, const std::filesystem::path& path) {
    csv::write_text(path, format_prediction_csv(rows));
}

}  // namespace segqa

#endif  // SEGQA_FEATURE_CSV_HPP
