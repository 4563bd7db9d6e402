#include "motlab/numeric.hpp"

#include <cstdio>

namespace motlab {

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace motlab
