#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sleepassoc {

// Minimal CSV support for the cohort file formats: plain comma separation,
// no quoting (field values in these schemas never contain commas), one
// header line. Lines starting with '#' before the header are skipped so
// exported tables can carry config headers.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> config_lines;  // leading '#' lines, verbatim minus '#'
    std::size_t first_data_line = 2;        // 1-based file line of rows[0]
};

// throws InputError if the file cannot be opened or has no header
CsvTable read_csv(const std::string& path);

std::vector<std::string> split_csv_line(std::string_view line);
std::string join_csv(const std::vector<std::string>& fields);

// shortest decimal string that parses back to exactly the same double
std::string format_double_roundtrip(double v);

// fixed 6-significant-digit formatting for report files
std::string format_sig6(double v);

}  // namespace sleepassoc
