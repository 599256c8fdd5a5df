#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace engage {

// CSV emission with a fixed float format so reruns are byte-identical.
std::string csv_double(double v);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);

    void add_row(std::vector<std::string> cells);

    // Convenience cell builders; cells are stored raw and quoted on output.
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(int64_t v) { return std::to_string(v); }
    static std::string cell(double v) { return csv_double(v); }

    std::string str() const;
    void write_file(const std::string& path) const;
    size_t rows() const { return rows_.size(); }

private:
    static std::string quote_if_needed(const std::string& s);
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

// Minimal reader for the artifacts this project writes (RFC 4180 quoting).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv_file(const std::string& path);
CsvTable read_csv_string(const std::string& text);

}  // namespace engage
