#pragma once

#include <string>

namespace prmix {

// Round-trip formatting for CSV output; identical values print identically,
// so seeded reruns produce byte-identical files.
std::string fmt_double(double v);

}  // namespace prmix
