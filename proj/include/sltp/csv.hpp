// Minimal CSV reading/writing. Files start with "# key=value" metadata lines
// (manifest hash, stage key, ...), then a header row and data rows.
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sltp {

/// Shortest round-trip decimal form; NaN is written as "nan".
std::string format_double(double x);
double parse_double(const std::string& s);
long long parse_int(const std::string& s);

class CsvWriter {
public:
    explicit CsvWriter(std::filesystem::path path);

    void meta(const std::string& key, const std::string& value);
    void header(const std::vector<std::string>& names);
    void row(const std::vector<std::string>& cells);
    /// Writes to a temporary file and renames it into place.
    void close();

private:
    std::filesystem::path path_;
    std::string buffer_;
    std::size_t columns_ = 0;
};

struct CsvTable {
    std::map<std::string, std::string> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
    const std::string& meta_value(const std::string& key) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace sltp
