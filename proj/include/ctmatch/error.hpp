#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ctmatch {

/// Bad or inconsistent input data. Maps to CLI exit code 1.
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed document text. Carries the byte offset where parsing stopped.
class parse_error : public data_error {
public:
    parse_error(const std::string& what, std::size_t offset)
        : data_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset)
    {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Line-oriented file format violation (run, qrels, topics, lexicons).
class format_error : public data_error {
public:
    format_error(const std::string& what, std::size_t line)
        : data_error("line " + std::to_string(line) + ": " + what), line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid configuration, missing inputs, stale artifacts. Maps to CLI exit code 2.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ctmatch
