#pragma once

#include <string>
#include <string_view>

namespace tdj {

/// Shortest round-trip decimal representation ("%.17g" fallback).
std::string format_double(double value);

/// C99 hexfloat, e.g. "0x1.8p+1"; round-trips bit-exactly.
std::string to_hexfloat(double value);
/// Parses a hexfloat or decimal literal; throws std::invalid_argument.
double parse_double(std::string_view text);

}  // namespace tdj
