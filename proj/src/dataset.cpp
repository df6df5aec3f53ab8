#include "reid/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "reid/errors.hpp"

namespace reid {

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kTestQuery: return "test-query";
    case Split::kTestGallery: return "test-gallery";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test-query") return Split::kTestQuery;
  if (name == "test-gallery") return Split::kTestGallery;
  throw ConfigError("unknown split tag: " + name);
}

std::vector<int> Dataset::indices_of(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    if (splits[i] == s) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> Dataset::train_ids() const {
  std::set<int> ids;
  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    if (splits[i] == Split::kTrain) ids.insert(tracklets[i].person_id);
  }
  return std::vector<int>(ids.begin(), ids.end());
}

double Dataset::train_mean() const {
  double sum = 0.0;
  std::int64_t count = 0;
  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    if (splits[i] != Split::kTrain) continue;
    for (const Frame& f : tracklets[i].frames) {
      for (double v : f.values) sum += v;
      count += static_cast<std::int64_t>(f.values.size());
    }
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

bool operator==(const Frame& a, const Frame& b) {
  return a.h == b.h && a.w == b.w && a.values == b.values;
}

bool operator==(const Tracklet& a, const Tracklet& b) {
  return a.person_id == b.person_id && a.camera_id == b.camera_id &&
         a.frames == b.frames;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.tracklets == b.tracklets && a.splits == b.splits;
}

namespace {

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void validate_spec(const SynthSpec& spec) {
  if (spec.identities < 2) {
    throw ConfigError("generate_synthetic needs at least 2 identities");
  }
  if (spec.tracklets_per_id < 1 || spec.frames_per_tracklet < 1 ||
      spec.cameras < 1) {
    throw ConfigError("synthetic counts must be at least 1");
  }
  if (spec.height < 2 || spec.width < 2) {
    throw ConfigError("frame grids must be at least 2x2");
  }
  if (spec.intra_noise < 0.0 || spec.inter_separation <= 0.0) {
    throw ConfigError("intra_noise must be >= 0 and inter_separation > 0");
  }
}

}  // namespace

Dataset generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  RandomStream root(seed);
  RandomStream proto_rng = root.split(1);
  RandomStream camera_rng = root.split(2);
  RandomStream noise_rng = root.split(3);

  const int cells = spec.height * spec.width;

  std::vector<std::vector<double>> prototypes(spec.identities);
  for (int id = 0; id < spec.identities; ++id) {
    prototypes[id].resize(cells);
    for (int c = 0; c < cells; ++c) {
      prototypes[id][c] = spec.inter_separation * proto_rng.next_normal();
    }
  }

  // Per-camera additive offset grid, same order of magnitude as the frame
  // noise so cross-camera retrieval stays a nuisance rather than a wall.
  std::vector<std::vector<double>> camera_offset(spec.cameras);
  for (int cam = 0; cam < spec.cameras; ++cam) {
    camera_offset[cam].resize(cells);
    for (int c = 0; c < cells; ++c) {
      camera_offset[cam][c] = spec.intra_noise * camera_rng.next_normal();
    }
  }

  const int train_count = (spec.identities + 1) / 2;

  Dataset ds;
  for (int id = 0; id < spec.identities; ++id) {
    bool is_train = id < train_count;
    for (int t = 0; t < spec.tracklets_per_id; ++t) {
      Tracklet tr;
      tr.person_id = id;
      tr.camera_id = t % spec.cameras;
      for (int fi = 0; fi < spec.frames_per_tracklet; ++fi) {
        Frame f;
        f.h = spec.height;
        f.w = spec.width;
        f.values.resize(cells);
        for (int c = 0; c < cells; ++c) {
          double v = prototypes[id][c] + camera_offset[tr.camera_id][c] +
                     spec.intra_noise * noise_rng.next_normal();
          f.values[c] = quantize_f32(v);
        }
        tr.frames.push_back(std::move(f));
      }
      ds.tracklets.push_back(std::move(tr));
      if (is_train) {
        ds.splits.push_back(Split::kTrain);
      } else {
        ds.splits.push_back(t == 0 ? Split::kTestQuery : Split::kTestGallery);
      }
    }
  }
  return ds;
}

std::vector<int> sample_frames(const Tracklet& t, int n, RandomStream& rng) {
  const int len = static_cast<int>(t.frames.size());
  if (len == 0) throw ConfigError("sample_frames: empty tracklet");
  if (n < 1) throw ConfigError("sample_frames: n must be at least 1");
  std::vector<int> picked;
  picked.reserve(n);
  if (len >= n) {
    // Partial Fisher-Yates over the index array.
    std::vector<int> idx(len);
    for (int i = 0; i < len; ++i) idx[i] = i;
    for (int i = 0; i < n; ++i) {
      int j = i + static_cast<int>(rng.next_below(len - i));
      std::swap(idx[i], idx[j]);
      picked.push_back(idx[i]);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      picked.push_back(static_cast<int>(rng.next_below(len)));
    }
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

void EraseParams::validate() const {
  if (probability < 0.0 || probability > 1.0) {
    throw ConfigError("erase probability must be in [0, 1]");
  }
  if (!(area_lo > 0.0 && area_lo <= area_hi && area_hi < 1.0)) {
    throw ConfigError("erase area range must satisfy 0 < lo <= hi < 1");
  }
  if (!(aspect_lo > 0.0 && aspect_lo <= aspect_hi)) {
    throw ConfigError("erase aspect range must satisfy 0 < lo <= hi");
  }
}

std::pair<Frame, int> random_erase(const Frame& f, const EraseParams& params,
                                   RandomStream& rng) {
  params.validate();
  Frame out = f;
  if (rng.next_double() >= params.probability) return {out, 0};

  const double total = static_cast<double>(f.h) * f.w;
  for (int attempt = 0; attempt < 10; ++attempt) {
    double area_frac = rng.next_uniform(params.area_lo, params.area_hi);
    double aspect = rng.next_uniform(params.aspect_lo, params.aspect_hi);
    double target = area_frac * total;
    int eh = static_cast<int>(std::lround(std::sqrt(target * aspect)));
    int ew = static_cast<int>(std::lround(std::sqrt(target / aspect)));
    if (eh < 1 || ew < 1 || eh > f.h || ew > f.w) continue;
    double realized = static_cast<double>(eh) * ew / total;
    if (realized < 0.9 * params.area_lo || realized > 1.1 * params.area_hi) {
      continue;  // integer rounding pushed the patch outside the band
    }
    int top = static_cast<int>(rng.next_below(f.h - eh + 1));
    int left = static_cast<int>(rng.next_below(f.w - ew + 1));
    for (int r = top; r < top + eh; ++r) {
      for (int c = left; c < left + ew; ++c) out.at(r, c) = params.fill;
    }
    return {out, 1};
  }
  return {out, 0};
}

ClipBatch pk_sample_batch(const Dataset& ds, int p, int k, int n,
                          const EraseParams& erase, RandomStream& rng) {
  erase.validate();
  if (p < 1 || k < 1 || n < 1) {
    throw ConfigError("pk_sample_batch: P, K, N must be at least 1");
  }
  std::vector<int> ids = ds.train_ids();
  if (static_cast<int>(ids.size()) < p) {
    throw ConfigError("pk_sample_batch: fewer train identities than P");
  }

  // Tracklet indices per train identity, in dataset order.
  std::vector<std::vector<int>> by_id(ids.size());
  for (std::size_t t = 0; t < ds.tracklets.size(); ++t) {
    if (ds.splits[t] != Split::kTrain) continue;
    auto it = std::lower_bound(ids.begin(), ids.end(), ds.tracklets[t].person_id);
    by_id[static_cast<std::size_t>(it - ids.begin())].push_back(static_cast<int>(t));
  }

  // Pick P distinct identities by partial shuffle.
  std::vector<int> order(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) order[i] = static_cast<int>(i);
  for (int i = 0; i < p; ++i) {
    int j = i + static_cast<int>(rng.next_below(static_cast<std::int64_t>(order.size()) - i));
    std::swap(order[i], order[j]);
  }

  ClipBatch batch;
  batch.p = p;
  batch.k = k;
  batch.n = n;
  for (int pi = 0; pi < p; ++pi) {
    const std::vector<int>& pool = by_id[order[pi]];
    // Without replacement when the identity has enough tracklets.
    std::vector<int> chosen;
    if (static_cast<int>(pool.size()) >= k) {
      std::vector<int> idx(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) idx[i] = static_cast<int>(i);
      for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(rng.next_below(static_cast<std::int64_t>(idx.size()) - i));
        std::swap(idx[i], idx[j]);
        chosen.push_back(pool[idx[i]]);
      }
    } else {
      for (int i = 0; i < k; ++i) {
        chosen.push_back(pool[rng.next_below(static_cast<std::int64_t>(pool.size()))]);
      }
    }
    for (int ki = 0; ki < k; ++ki) {
      const Tracklet& tr = ds.tracklets[chosen[ki]];
      Clip clip;
      clip.person_id = tr.person_id;
      clip.camera_id = tr.camera_id;
      std::vector<int> frame_idx = sample_frames(tr, n, rng);
      int forced = -1;
      if (erase.force_one_erase) {
        forced = static_cast<int>(rng.next_below(n));
      }
      for (int fi = 0; fi < n; ++fi) {
        const Frame& src = tr.frames[frame_idx[fi]];
        if (erase.force_one_erase) {
          if (fi == forced) {
            EraseParams forced_params = erase;
            forced_params.probability = 1.0;
            auto [frame, label] = random_erase(src, forced_params, rng);
            clip.frames.push_back(std::move(frame));
            clip.erase_labels.push_back(label);
          } else {
            clip.frames.push_back(src);
            clip.erase_labels.push_back(0);
          }
        } else {
          auto [frame, label] = random_erase(src, erase, rng);
          clip.frames.push_back(std::move(frame));
          clip.erase_labels.push_back(label);
        }
      }
      batch.clips.push_back(std::move(clip));
    }
  }
  return batch;
}

}  // namespace reid
