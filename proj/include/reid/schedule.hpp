#pragma once

#include <vector>

namespace reid {

// Linear warm-up over the first warmup_epochs, then a step decay at each
// decay epoch.
struct Schedule {
  double base_lr = 3.5e-4;
  int warmup_epochs = 10;
  std::vector<int> decay_epochs = {40, 70};
  double decay_factor = 0.1;

  void validate() const;
};

// epoch is 1-based.
double lr_at_epoch(const Schedule& s, int epoch);

}  // namespace reid
