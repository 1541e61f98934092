#include "aistk/binio.hpp"

#include <charconv>
#include <cstdio>
#include <cstring>

#include "aistk/errors.hpp"

namespace aistk {

void write_f32_le(std::ostream& os, float value) {
  std::uint32_t u;
  std::memcpy(&u, &value, 4);
  const char b[4] = {char(u & 0xff), char((u >> 8) & 0xff), char((u >> 16) & 0xff),
                     char((u >> 24) & 0xff)};
  os.write(b, 4);
}

float read_f32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) throw IoError("unexpected end of binary payload");
  const std::uint32_t u = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
                          (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok, const std::string& what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw FormatError("bad numeric value for " + what + ": '" + tok + "'");
  return v;
}

std::int64_t parse_int(const std::string& tok, const std::string& what) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw FormatError("bad integer value for " + what + ": '" + tok + "'");
  return v;
}

}  // namespace aistk
