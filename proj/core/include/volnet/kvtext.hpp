#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "volnet/error.hpp"

namespace volnet {

// Flat "key = value" text, one pair per line, '#' comments. The reader
// tracks which keys were consumed so unknown keys (typos) can be rejected;
// the writer emits keys in insertion order, giving a canonical form that
// round-trips exactly.

class KvWriter {
public:
    void add(const std::string& key, const std::string& value);
    void add(const std::string& key, double value); // shortest exact decimal
    void add(const std::string& key, std::uint64_t value);
    std::string str() const;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

class KvReader {
public:
    /// Parses text; throws DataError on malformed lines or duplicate keys.
    explicit KvReader(const std::string& text, std::string origin = "config");

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key, double fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);

    /// Keys matching a prefix, in file order (for repeatable entries).
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    /// Throws ConfigError when any key was never consumed.
    void reject_unknown() const;

private:
    std::string lookup(const std::string& key);

    std::string origin_;
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
    std::set<std::string> consumed_;
};

std::string format_double_exact(double value);
double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_u64(const std::string& text, const std::string& what);

} // namespace volnet
