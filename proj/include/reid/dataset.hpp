#pragma once

#include <string>
#include <utility>
#include <vector>

#include "reid/random.hpp"

namespace reid {

// Raw "image-like" signal; every frame of a tracklet shares its grid shape.
struct Frame {
  int h = 0;
  int w = 0;
  std::vector<double> values;  // h * w, row-major

  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * w + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * w + c]; }
};

enum class Split { kTrain, kTestQuery, kTestGallery };

std::string split_name(Split s);
Split split_from_name(const std::string& name);

// One person/camera video clip; frame order is temporal.
struct Tracklet {
  int person_id = 0;
  int camera_id = 0;
  std::vector<Frame> frames;
};

struct Dataset {
  std::vector<Tracklet> tracklets;
  std::vector<Split> splits;  // one tag per tracklet

  std::vector<int> indices_of(Split s) const;
  // Sorted unique person ids of the train split.
  std::vector<int> train_ids() const;
  // Mean cell value over all train-split frames (random-erase fill default).
  double train_mean() const;
};

bool operator==(const Frame& a, const Frame& b);
bool operator==(const Tracklet& a, const Tracklet& b);
bool operator==(const Dataset& a, const Dataset& b);

struct SynthSpec {
  int identities = 32;
  int tracklets_per_id = 4;
  int frames_per_tracklet = 8;
  int height = 8;
  int width = 8;
  int cameras = 2;
  double intra_noise = 0.5;
  double inter_separation = 5.0;
};

// Deterministic in (spec, seed). Each identity gets a latent prototype grid;
// frames are prototype + per-camera offset + per-frame noise, quantized to
// 32-bit floats so the on-disk format round-trips bit-exactly. Identities are
// split 50/50 into train/test; per test identity the first tracklet is the
// query and the rest are gallery.
Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

// N indices drawn uniformly, without replacement when the tracklet is long
// enough and with replacement otherwise, returned in ascending order.
std::vector<int> sample_frames(const Tracklet& t, int n, RandomStream& rng);

struct EraseParams {
  double probability = 0.5;
  double area_lo = 0.02;
  double area_hi = 0.4;
  double aspect_lo = 0.3;
  double aspect_hi = 3.33;
  double fill = 0.0;
  bool force_one_erase = false;

  void validate() const;
};

// With probability p overwrite a random rectangle (area fraction in
// [area_lo, area_hi], aspect ratio in [aspect_lo, aspect_hi]) with the fill
// value and return label 1. Rectangles that do not fit or whose realized
// area lands outside [0.9*area_lo, 1.1*area_hi] after integer rounding are
// resampled, up to 10 attempts, after which the frame is returned unchanged
// with label 0.
std::pair<Frame, int> random_erase(const Frame& f, const EraseParams& params,
                                   RandomStream& rng);

struct Clip {
  int person_id = 0;
  int camera_id = 0;
  std::vector<Frame> frames;
  std::vector<int> erase_labels;  // 1 iff the frame was modified
};

// P identities × K clips × N frames; the unit of one training step.
struct ClipBatch {
  int p = 0;
  int k = 0;
  int n = 0;
  std::vector<Clip> clips;  // p * k entries, grouped by identity
};

// Draws P distinct train identities, K tracklets each (with replacement when
// an identity has fewer than K), N frames per clip, and applies random
// erasing per frame. With force_one_erase exactly one frame per clip is
// erased regardless of the configured probability.
ClipBatch pk_sample_batch(const Dataset& ds, int p, int k, int n,
                          const EraseParams& erase, RandomStream& rng);

}  // namespace reid
