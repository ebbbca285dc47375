#include "volnet/kvtext.hpp"

#include <charconv>
#include <sstream>

namespace volnet {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string format_double_exact(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) {
        throw Error("double formatting failed");
    }
    return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& what) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("bad numeric value for " + what + ": '" + text + "'");
    }
    return value;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    std::uint64_t value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("bad integer value for " + what + ": '" + text + "'");
    }
    return value;
}

void KvWriter::add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
}

void KvWriter::add(const std::string& key, double value) {
    entries_.emplace_back(key, format_double_exact(value));
}

void KvWriter::add(const std::string& key, std::uint64_t value) {
    entries_.emplace_back(key, std::to_string(value));
}

std::string KvWriter::str() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k + " = " + v + "\n";
    }
    return out;
}

KvReader::KvReader(const std::string& text, std::string origin) : origin_(std::move(origin)) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw DataError(origin_ + ":" + std::to_string(line_no) +
                            ": expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw DataError(origin_ + ":" + std::to_string(line_no) + ": empty key");
        }
        if (!values_.emplace(key, value).second) {
            throw DataError(origin_ + ":" + std::to_string(line_no) + ": duplicate key '" +
                            key + "'");
        }
        order_.push_back(key);
    }
}

bool KvReader::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KvReader::lookup(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw DataError(origin_ + ": missing required key '" + key + "'");
    }
    consumed_.insert(key);
    return it->second;
}

std::string KvReader::get_string(const std::string& key) { return lookup(key); }

std::string KvReader::get_string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    return lookup(key);
}

double KvReader::get_double(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return parse_double(lookup(key), key);
}

std::uint64_t KvReader::get_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return parse_u64(lookup(key), key);
}

std::vector<std::string> KvReader::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const std::string& key : order_) {
        if (key.rfind(prefix, 0) == 0) out.push_back(key);
    }
    return out;
}

void KvReader::reject_unknown() const {
    for (const std::string& key : order_) {
        if (!consumed_.count(key)) {
            throw ConfigError(origin_ + ": unknown key '" + key + "'");
        }
    }
}

} // namespace volnet
