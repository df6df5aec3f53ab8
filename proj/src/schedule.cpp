#include "reid/schedule.hpp"

#include <cmath>

#include "reid/errors.hpp"

namespace reid {

void Schedule::validate() const {
  if (base_lr <= 0.0) throw ConfigError("base_lr must be positive");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be non-negative");
  if (decay_factor <= 0.0 || decay_factor > 1.0) {
    throw ConfigError("decay_factor must be in (0, 1]");
  }
  int prev = warmup_epochs;
  for (int e : decay_epochs) {
    if (e <= prev) {
      throw ConfigError("decay_epochs must be strictly increasing and after warmup");
    }
    prev = e;
  }
}

double lr_at_epoch(const Schedule& s, int epoch) {
  if (epoch < 1) throw ConfigError("epoch is 1-based");
  if (s.warmup_epochs > 0 && epoch <= s.warmup_epochs) {
    return s.base_lr * static_cast<double>(epoch) / s.warmup_epochs;
  }
  int decays = 0;
  for (int e : s.decay_epochs) {
    if (epoch >= e) ++decays;
  }
  return s.base_lr * std::pow(s.decay_factor, decays);
}

}  // namespace reid
