#include "nlkpp/csvio.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlkpp/errors.hpp"

namespace nlkpp {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& comments,
               const std::string& header, const std::vector<std::vector<double>>& rows) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    for (const auto& c : comments) out << "# " << c << '\n';
    out << header << '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out << ',';
            out << fmt17(row[k]);
        }
        out << '\n';
    }
    if (!out) throw ConfigError("write failed: " + path);
}

CsvData read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open for reading: " + path);
    CsvData data;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::size_t start = line.find_first_not_of("# ");
            data.comments.push_back(start == std::string::npos ? "" : line.substr(start));
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        if (!saw_header) {
            while (std::getline(ss, cell, ',')) data.header.push_back(cell);
            saw_header = true;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("non-numeric CSV cell in " + path + ": " + cell);
            }
        }
        data.rows.push_back(std::move(row));
    }
    if (!saw_header) throw ConfigError("CSV has no header row: " + path);
    return data;
}

}  // namespace nlkpp
