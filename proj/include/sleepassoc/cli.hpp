#pragma once

#include <string>
#include <vector>

namespace sleepassoc {

// Batch front end: subcommands extract, analyze, simulate, report.
// Exit codes: 0 ok, 2 input error, 3 schema error, 4 config error,
// 5 statistical failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace sleepassoc
