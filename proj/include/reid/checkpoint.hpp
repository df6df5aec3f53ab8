#pragma once

#include <cstdint>
#include <string>

#include "reid/losses.hpp"
#include "reid/model.hpp"
#include "reid/optimizer.hpp"

namespace reid {

struct Checkpoint {
  ModelParams model;
  CenterState centers;
  OptimizerState opt;
  std::uint64_t config_digest = 0;
  int epoch = 0;  // completed epochs
};

// Binary checkpoint format, little-endian: magic "RCKP", version u32 = 1,
// tensor count u64, then per tensor a length-prefixed name, rows u64,
// cols u64 and rows*cols 64-bit floats. Integer metadata rides along as 1×n
// tensors of exactly representable doubles, so save→load→save is
// byte-identical.
void save_checkpoint(const Checkpoint& cp, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace reid
