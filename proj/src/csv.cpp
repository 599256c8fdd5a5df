#include "engage/csv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace engage {

std::string csv_double(double v) {
    if (v == static_cast<int64_t>(v) && std::abs(v) < 1e15)
        return std::to_string(static_cast<int64_t>(v));
    char buf[40];
    int n = std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf, n);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size())
        throw std::runtime_error("csv row width mismatch");
    rows_.push_back(std::move(cells));
}

std::string CsvWriter::quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string CsvWriter::str() const {
    std::ostringstream os;
    for (size_t i = 0; i < header_.size(); ++i) {
        if (i) os << ',';
        os << quote_if_needed(header_[i]);
    }
    os << '\n';
    for (const auto& row : rows_) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) os << ',';
            os << quote_if_needed(row[i]);
        }
        os << '\n';
    }
    return os.str();
}

void CsvWriter::write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << str();
}

int CsvTable::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> row;
    std::string cell;
    bool in_quotes = false;
    bool row_has_data = false;
    size_t i = 0;
    while (i < text.size()) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            in_quotes = true;
            row_has_data = true;
        } else if (c == ',') {
            row.push_back(std::move(cell));
            cell.clear();
            row_has_data = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (row_has_data || !cell.empty() || !row.empty()) {
                row.push_back(std::move(cell));
                cell.clear();
                out.push_back(std::move(row));
                row.clear();
                row_has_data = false;
            }
        } else {
            cell += c;
            row_has_data = true;
        }
        ++i;
    }
    if (row_has_data || !cell.empty() || !row.empty()) {
        row.push_back(std::move(cell));
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace

CsvTable read_csv_string(const std::string& text) {
    auto rows = parse_csv(text);
    CsvTable t;
    if (rows.empty()) return t;
    t.header = rows.front();
    t.rows.assign(rows.begin() + 1, rows.end());
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return read_csv_string(os.str());
}

}  // namespace engage
