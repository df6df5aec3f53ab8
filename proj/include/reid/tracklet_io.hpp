#pragma once

#include <string>

#include "reid/dataset.hpp"

namespace reid {

// Binary tracklet-feature format, little-endian throughout:
//   magic "RTK1", version u32 = 1, tracklet count u64, then per tracklet
//   person_id u32, camera_id u32, frame count u32, H u32, W u32 followed by
//   H*W*count 32-bit floats. Split tags live in a UTF-8 JSON sidecar
//   "<path>.manifest.json" keyed by tracklet index. Floats are stored 32-bit
//   on disk and widened to 64-bit in memory.
void write_tracklets(const Dataset& ds, const std::string& path);
Dataset read_tracklets(const std::string& path);

std::string manifest_path(const std::string& data_path);

}  // namespace reid
