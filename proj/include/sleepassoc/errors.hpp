#pragma once

#include <stdexcept>
#include <string>

namespace sleepassoc {

// Error taxonomy mirrors the CLI exit-code map:
//   InputError  -> 2   (missing/unreadable input files)
//   SchemaError -> 3   (malformed table schema)
//   ConfigError -> 4   (invalid run or simulation config)
//   StatError   -> 5   (statistical failure: degenerate input, rank deficiency, ...)
struct InputError : std::runtime_error {
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : std::runtime_error {
    explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StatError : std::runtime_error {
    explicit StatError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sleepassoc
