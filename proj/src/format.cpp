#include "tdjunta/format.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace tdj {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    if (res.ec != std::errc{}) {
        std::snprintf(buf, sizeof buf, "%.17g", value);
        return buf;
    }
    return {buf, res.ptr};
}

std::string to_hexfloat(double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", value);
    return buf;
}

double parse_double(std::string_view text) {
    const std::string s(text);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) {
        throw std::invalid_argument("parse_double: not a number: '" + s + "'");
    }
    return v;
}

}  // namespace tdj
