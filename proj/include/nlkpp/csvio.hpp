#pragma once

#include <string>
#include <vector>

namespace nlkpp {

// Shortest round-trip decimal form (%.17g); all CSV numbers go through this
// so outputs are byte-stable across runs and thread counts.
std::string fmt17(double v);

// Write a CSV file: optional "# key=value" comment lines, one header row,
// numeric rows. Creates parent directories; always uses '\n'.
void write_csv(const std::string& path, const std::vector<std::string>& comments,
               const std::string& header, const std::vector<std::vector<double>>& rows);

struct CsvData {
    std::vector<std::string> comments;  // leading '#' lines, stripped
    std::vector<std::string> header;    // split on ','
    std::vector<std::vector<double>> rows;
};

CsvData read_csv(const std::string& path);

}  // namespace nlkpp
