#include "reid/random.hpp"

#include <cmath>

#include "reid/errors.hpp"

namespace reid {

double RandomStream::next_normal() {
  // Box-Muller; 1-u keeps the log argument in (0, 1].
  double u1 = next_double();
  double u2 = next_double();
  double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::int64_t RandomStream::next_below(std::int64_t n) {
  if (n <= 0) {
    throw ConfigError("next_below requires a positive bound");
  }
  // Multiply-shift maps the 64-bit draw onto [0, n) without fp rounding.
  unsigned __int128 wide =
      static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<std::int64_t>(wide >> 64);
}

}  // namespace reid
