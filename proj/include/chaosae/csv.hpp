#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "chaosae/error.hpp"

namespace chaosae::csv {

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
    if (text == "nan") return std::nan("");
    if (text == "inf") return INFINITY;
    if (text == "-inf") return -INFINITY;
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw InvalidInput("cannot parse number '" + std::string(text) + "'");
    return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    return os;
}

inline std::string read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// Two-column plot data, whitespace separated.
inline void write_dat(const std::string& path, const std::vector<double>& x, const std::vector<double>& y) {
    auto os = open_out(path);
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
        os << format_double(x[i]) << ' ' << format_double(y[i]) << '\n';
    if (!os) throw IoError("write failed for '" + path + "'");
}

} // namespace chaosae::csv
