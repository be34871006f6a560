#ifndef MCN_TEXT_FORMAT_H_
#define MCN_TEXT_FORMAT_H_

#include <charconv>
#include <string>

namespace mcn {

// Shortest decimal form that parses back to the same double.
inline std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace mcn

#endif  // MCN_TEXT_FORMAT_H_
