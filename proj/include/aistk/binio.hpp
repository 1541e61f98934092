#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

namespace aistk {

/// Little-endian binary32 payload helpers shared by the checkpoint formats.
void write_f32_le(std::ostream& os, float value);
float read_f32_le(std::istream& is);  // throws IoError on short read

/// Shortest round-trip decimal for a double (printf %.17g).
std::string fmt_g17(double v);

/// Strict numeric parsing; the whole token must be consumed.
double parse_double(const std::string& tok, const std::string& what);
std::int64_t parse_int(const std::string& tok, const std::string& what);

}  // namespace aistk
