#include "prmix/io.hpp"

#include <cstdio>

namespace prmix {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace prmix
