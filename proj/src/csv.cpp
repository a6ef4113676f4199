#include "sleepassoc/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "sleepassoc/errors.hpp"

namespace sleepassoc {

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join_csv(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open input file: " + path);

    CsvTable t;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            if (!line.empty() && line[0] == '#') {
                t.config_lines.push_back(line.substr(1));
                continue;
            }
            if (line.empty()) continue;
            t.header = split_csv_line(line);
            t.first_data_line = lineno + 1;
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        t.rows.push_back(split_csv_line(line));
    }
    if (!have_header) throw InputError("no header line in: " + path);
    return t;
}

std::string format_double_roundtrip(double v) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

std::string format_sig6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace sleepassoc
