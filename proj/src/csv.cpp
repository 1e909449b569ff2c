#include "llmpred/csv.hpp"

#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>

#include "llmpred/errors.hpp"

namespace llmpred {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
    const std::string text = trim(raw);
    if (text.empty()) {
        throw CsvParseError(row, col, "empty cell at row " + std::to_string(row) +
                                          ", col " + std::to_string(col));
    }
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        throw CsvParseError(row, col, "non-numeric cell \"" + text + "\" at row " +
                                          std::to_string(row) + ", col " + std::to_string(col));
    }
    if (consumed != text.size() || !std::isfinite(value)) {
        throw CsvParseError(row, col, "non-numeric cell \"" + text + "\" at row " +
                                          std::to_string(row) + ", col " + std::to_string(col));
    }
    return value;
}

} // namespace

ChannelSet load_csv_dataset(const std::string& path,
                            const std::optional<std::vector<int>>& selected_channels) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::missing_file, "cannot open dataset file: " + path);
    }

    std::string header;
    if (!std::getline(in, header)) {
        throw Error(ErrorCode::empty_dataset, "dataset has no header row: " + path);
    }
    const std::size_t header_cols = split_row(header).size();
    if (header_cols < 2) {
        throw Error(ErrorCode::empty_dataset,
                    "dataset needs a timestamp column plus at least one feature: " + path);
    }
    const std::size_t feature_count = header_cols - 1;

    std::vector<int> picks;
    if (selected_channels) {
        picks = *selected_channels;
        for (int idx : picks) {
            if (idx < 0 || static_cast<std::size_t>(idx) >= feature_count) {
                throw Error(ErrorCode::config_error,
                            "selected channel " + std::to_string(idx) + " out of range (file has " +
                                std::to_string(feature_count) + " features)");
            }
        }
    } else {
        for (std::size_t i = 0; i < feature_count; ++i) picks.push_back(static_cast<int>(i));
    }

    ChannelSet set;
    set.channels.resize(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i) {
        set.channels[i].channel_id = static_cast<int>(i);
    }

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue; // tolerate trailing blank lines
        const std::vector<std::string> cells = split_row(line);
        if (cells.size() != header_cols) {
            throw CsvParseError(row, cells.size(),
                                "row " + std::to_string(row) + " has " +
                                    std::to_string(cells.size()) + " cells, header has " +
                                    std::to_string(header_cols));
        }
        for (std::size_t i = 0; i < picks.size(); ++i) {
            const std::size_t col = static_cast<std::size_t>(picks[i]) + 1; // +1 skips timestamp
            set.channels[i].values.push_back(parse_cell(cells[col], row, col));
        }
        ++row;
    }
    if (row == 0) {
        throw Error(ErrorCode::empty_dataset, "dataset has no data rows: " + path);
    }
    return set;
}

} // namespace llmpred
