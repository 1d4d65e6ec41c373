#include "sltp/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sltp/volume.hpp"

namespace sltp {

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not a number: '" + s + "'");
    return v;
}

long long parse_int(const std::string& s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw std::invalid_argument("not an integer: '" + s + "'");
    return v;
}

CsvWriter::CsvWriter(std::filesystem::path path) : path_(std::move(path)) {}

void CsvWriter::meta(const std::string& key, const std::string& value) {
    buffer_ += "# " + key + "=" + value + "\n";
}

void CsvWriter::header(const std::vector<std::string>& names) {
    columns_ = names.size();
    row(names);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (columns_ && cells.size() != columns_) throw std::invalid_argument("CSV row width differs from header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i].find_first_of(",\n") != std::string::npos)
            throw std::invalid_argument("CSV cell contains a separator: " + cells[i]);
        if (i) buffer_ += ',';
        buffer_ += cells[i];
    }
    buffer_ += '\n';
}

void CsvWriter::close() {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    auto tmp = path_;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << buffer_;
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path_);
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw std::invalid_argument("CSV column not found: " + name);
}

const std::string& CsvTable::meta_value(const std::string& key) const {
    auto it = meta.find(key);
    if (it == meta.end()) throw std::invalid_argument("CSV metadata missing: " + key);
    return it->second;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                auto key = line.substr(1, eq - 1);
                key.erase(0, key.find_first_not_of(' '));
                t.meta[key] = line.substr(eq + 1);
            }
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
        } else {
            if (cells.size() != t.header.size())
                throw IoError(path.string() + ": row width " + std::to_string(cells.size()) + " differs from header");
            t.rows.push_back(std::move(cells));
        }
    }
    if (!have_header) throw IoError(path.string() + ": no header row");
    return t;
}

}  // namespace sltp
