#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "reid/dataset.hpp"
#include "reid/errors.hpp"
#include "reid/tracklet_io.hpp"

using namespace reid;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

double frame_distance(const Frame& a, const Frame& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double diff = a.values[i] - b.values[i];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("synthetic generator splits identities evenly") {
  SynthSpec spec;
  spec.identities = 8;
  spec.tracklets_per_id = 4;
  spec.frames_per_tracklet = 4;
  Dataset ds = generate_synthetic(spec, 1);

  std::set<int> train, test;
  for (std::size_t i = 0; i < ds.tracklets.size(); ++i) {
    if (ds.splits[i] == Split::kTrain) {
      train.insert(ds.tracklets[i].person_id);
    } else {
      test.insert(ds.tracklets[i].person_id);
    }
  }
  CHECK(train.size() == 4);
  CHECK(test.size() == 4);
  // One query per test identity, the rest gallery.
  CHECK(ds.indices_of(Split::kTestQuery).size() == 4);
  CHECK(ds.indices_of(Split::kTestGallery).size() == 12);
}

TEST_CASE("synthetic generator is deterministic") {
  SynthSpec spec;
  spec.identities = 4;
  spec.tracklets_per_id = 2;
  spec.frames_per_tracklet = 3;
  Dataset a = generate_synthetic(spec, 77);
  Dataset b = generate_synthetic(spec, 77);
  CHECK(a == b);
  Dataset c = generate_synthetic(spec, 78);
  CHECK_FALSE(a == c);
}

TEST_CASE("zero intra noise collapses frames per person and camera") {
  SynthSpec spec;
  spec.identities = 4;
  spec.tracklets_per_id = 4;
  spec.frames_per_tracklet = 3;
  spec.cameras = 2;
  spec.intra_noise = 0.0;
  Dataset ds = generate_synthetic(spec, 5);
  for (const Tracklet& tr : ds.tracklets) {
    for (const Frame& f : tr.frames) CHECK(f == tr.frames[0]);
  }
  // Same person and camera implies identical frames across tracklets too.
  CHECK(ds.tracklets[0].frames[0] == ds.tracklets[2].frames[0]);
}

TEST_CASE("synthetic generator rejects degenerate specs") {
  SynthSpec spec;
  spec.identities = 1;
  CHECK_THROWS_AS(generate_synthetic(spec, 1), ConfigError);
}

TEST_CASE("separated identities dominate intra-identity spread") {
  SynthSpec spec;
  spec.identities = 8;
  spec.tracklets_per_id = 2;
  spec.frames_per_tracklet = 4;
  spec.inter_separation = 5.0;
  spec.intra_noise = 0.25;
  Dataset ds = generate_synthetic(spec, 9);

  double inter = 0.0, intra = 0.0;
  int inter_n = 0, intra_n = 0;
  for (std::size_t a = 0; a < ds.tracklets.size(); ++a) {
    for (std::size_t b = a + 1; b < ds.tracklets.size(); ++b) {
      double d = frame_distance(ds.tracklets[a].frames[0], ds.tracklets[b].frames[0]);
      if (ds.tracklets[a].person_id == ds.tracklets[b].person_id) {
        intra += d;
        ++intra_n;
      } else {
        inter += d;
        ++inter_n;
      }
    }
  }
  CHECK(inter / inter_n > intra / intra_n);
}

TEST_CASE("sample_frames policies") {
  Tracklet t;
  t.frames.resize(4, Frame{2, 2, {0, 0, 0, 0}});
  RandomStream rng(3);
  CHECK(sample_frames(t, 4, rng) == std::vector<int>{0, 1, 2, 3});

  Tracklet small;
  small.frames.resize(2, Frame{2, 2, {0, 0, 0, 0}});
  RandomStream rng2(3);
  std::vector<int> idx = sample_frames(small, 4, rng2);
  CHECK(idx.size() == 4);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    CHECK(idx[i] >= 0);
    CHECK(idx[i] <= 1);
    if (i > 0) CHECK(idx[i] >= idx[i - 1]);
  }

  RandomStream a(99), b(99);
  CHECK(sample_frames(t, 3, a) == sample_frames(t, 3, b));

  Tracklet empty;
  RandomStream rng3(1);
  CHECK_THROWS_AS(sample_frames(empty, 2, rng3), ConfigError);
}

TEST_CASE("random_erase no-op at probability zero") {
  Frame f{4, 4, std::vector<double>(16, 2.5)};
  EraseParams params;
  params.probability = 0.0;
  RandomStream rng(1);
  auto [out, label] = random_erase(f, params, rng);
  CHECK(label == 0);
  CHECK(out == f);
}

TEST_CASE("random_erase places the exact block drawn from the stream") {
  Frame f{8, 8, std::vector<double>(64, 1.0)};
  EraseParams params;
  params.probability = 1.0;
  params.area_lo = 0.25;
  params.area_hi = 0.25;
  params.aspect_lo = 1.0;
  params.aspect_hi = 1.0;
  params.fill = -9.0;

  RandomStream rng(2024);
  RandomStream replay = rng;  // same state: replay the draw sequence by hand
  auto [out, label] = random_erase(f, params, rng);
  CHECK(label == 1);

  replay.next_double();             // probability gate
  replay.next_uniform(0.25, 0.25);  // area fraction
  replay.next_uniform(1.0, 1.0);    // aspect ratio
  int expect_top = static_cast<int>(replay.next_below(5));
  int expect_left = static_cast<int>(replay.next_below(5));

  int changed = 0;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      bool inside = r >= expect_top && r < expect_top + 4 && c >= expect_left &&
                    c < expect_left + 4;
      if (inside) {
        CHECK(out.at(r, c) == -9.0);
        ++changed;
      } else {
        CHECK(out.at(r, c) == 1.0);
      }
    }
  }
  CHECK(changed == 16);
}

TEST_CASE("random_erase is deterministic and respects the area band") {
  Frame f{10, 12, std::vector<double>(120, 0.5)};
  EraseParams params;
  params.probability = 1.0;
  params.fill = 0.0;

  RandomStream a(31), b(31);
  auto [out_a, label_a] = random_erase(f, params, a);
  auto [out_b, label_b] = random_erase(f, params, b);
  CHECK(label_a == label_b);
  CHECK(out_a == out_b);

  RandomStream rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    auto [out, label] = random_erase(f, params, rng);
    if (label == 0) continue;
    int erased = 0;
    for (double v : out.values) {
      if (v == 0.0) ++erased;
    }
    double frac = static_cast<double>(erased) / 120.0;
    CHECK(frac >= 0.9 * params.area_lo);
    CHECK(frac <= 1.1 * params.area_hi);
  }
}

TEST_CASE("random_erase validates ranges") {
  Frame f{4, 4, std::vector<double>(16, 0.0)};
  RandomStream rng(1);
  EraseParams bad;
  bad.area_lo = 0.0;
  CHECK_THROWS_AS(random_erase(f, bad, rng), ConfigError);
  EraseParams bad2;
  bad2.aspect_lo = -1.0;
  CHECK_THROWS_AS(random_erase(f, bad2, rng), ConfigError);
  EraseParams bad3;
  bad3.probability = 1.5;
  CHECK_THROWS_AS(random_erase(f, bad3, rng), ConfigError);
}

TEST_CASE("pk_sample_batch shapes and labels") {
  SynthSpec spec;
  spec.identities = 8;
  spec.tracklets_per_id = 3;
  spec.frames_per_tracklet = 6;
  Dataset ds = generate_synthetic(spec, 21);

  EraseParams erase;
  erase.probability = 0.0;
  RandomStream rng(4);
  ClipBatch batch = pk_sample_batch(ds, 2, 2, 4, erase, rng);
  CHECK(batch.clips.size() == 4);
  std::set<int> ids;
  int frames = 0;
  for (const Clip& c : batch.clips) {
    ids.insert(c.person_id);
    frames += static_cast<int>(c.frames.size());
    for (int label : c.erase_labels) CHECK(label == 0);
  }
  CHECK(ids.size() == 2);
  CHECK(frames == 16);

  RandomStream rng2(4);
  CHECK_THROWS_AS(pk_sample_batch(ds, 5, 2, 4, erase, rng2), ConfigError);
}

TEST_CASE("pk_sample_batch shape invariants hold over random P K N") {
  SynthSpec spec;
  spec.identities = 12;
  spec.tracklets_per_id = 2;
  spec.frames_per_tracklet = 5;
  Dataset ds = generate_synthetic(spec, 33);
  const int train_ids = static_cast<int>(ds.train_ids().size());

  EraseParams erase;
  RandomStream rng(91);
  for (int trial = 0; trial < 30; ++trial) {
    int p = 1 + static_cast<int>(rng.next_below(train_ids));
    int k = 1 + static_cast<int>(rng.next_below(4));  // forces replacement past 2
    int n = 1 + static_cast<int>(rng.next_below(8));
    ClipBatch batch = pk_sample_batch(ds, p, k, n, erase, rng);
    CHECK(batch.clips.size() == static_cast<std::size_t>(p * k));
    std::map<int, int> clips_per_id;
    for (const Clip& c : batch.clips) {
      clips_per_id[c.person_id] += 1;
      CHECK(c.frames.size() == static_cast<std::size_t>(n));
      CHECK(c.erase_labels.size() == static_cast<std::size_t>(n));
    }
    CHECK(clips_per_id.size() == static_cast<std::size_t>(p));
    for (const auto& [pid, count] : clips_per_id) CHECK(count == k);
  }
}

TEST_CASE("force_one_erase erases exactly one frame per clip") {
  SynthSpec spec;
  spec.identities = 6;
  spec.tracklets_per_id = 2;
  spec.frames_per_tracklet = 6;
  Dataset ds = generate_synthetic(spec, 8);

  EraseParams erase;
  erase.force_one_erase = true;
  erase.probability = 0.0;  // ignored by the forced path
  RandomStream rng(5);
  ClipBatch batch = pk_sample_batch(ds, 3, 2, 4, erase, rng);
  for (const Clip& c : batch.clips) {
    int erased = 0;
    for (int label : c.erase_labels) erased += label;
    CHECK(erased == 1);
  }
}

TEST_CASE("tracklet files round trip bit-exactly") {
  SynthSpec spec;
  spec.identities = 4;
  spec.tracklets_per_id = 2;
  spec.frames_per_tracklet = 3;
  spec.height = 4;
  spec.width = 5;
  Dataset ds = generate_synthetic(spec, 101);

  std::string path = temp_path("reid_roundtrip.rtk");
  write_tracklets(ds, path);
  Dataset loaded = read_tracklets(path);
  CHECK(loaded == ds);

  // Rewriting the loaded dataset reproduces the bytes exactly.
  std::string path2 = temp_path("reid_roundtrip2.rtk");
  write_tracklets(loaded, path2);
  CHECK(slurp(path) == slurp(path2));
  std::filesystem::remove(path);
  std::filesystem::remove(manifest_path(path));
  std::filesystem::remove(path2);
  std::filesystem::remove(manifest_path(path2));
}

TEST_CASE("tracklet reader distinguishes error classes") {
  SynthSpec spec;
  spec.identities = 2;
  spec.tracklets_per_id = 2;
  spec.frames_per_tracklet = 2;
  Dataset ds = generate_synthetic(spec, 7);
  std::string path = temp_path("reid_errors.rtk");
  write_tracklets(ds, path);

  std::vector<char> bytes = slurp(path);

  SUBCASE("bad magic") {
    std::vector<char> bad = bytes;
    bad[0] = 'X';
    bad[1] = 'X';
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(bad.data(), static_cast<std::streamsize>(bad.size()));
    try {
      read_tracklets(path);
      CHECK(false);
    } catch (const IoError& e) {
      CHECK(e.code == IoError::Code::kBadMagic);
    }
  }

  SUBCASE("version mismatch") {
    std::vector<char> bad = bytes;
    bad[4] = 9;
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(bad.data(), static_cast<std::streamsize>(bad.size()));
    try {
      read_tracklets(path);
      CHECK(false);
    } catch (const IoError& e) {
      CHECK(e.code == IoError::Code::kBadVersion);
    }
  }

  SUBCASE("truncated mid frame") {
    std::vector<char> bad(bytes.begin(), bytes.begin() + bytes.size() / 2);
    std::ofstream(path, std::ios::binary | std::ios::trunc)
        .write(bad.data(), static_cast<std::streamsize>(bad.size()));
    try {
      read_tracklets(path);
      CHECK(false);
    } catch (const IoError& e) {
      CHECK(e.code == IoError::Code::kTruncated);
    }
  }

  SUBCASE("missing manifest") {
    std::filesystem::remove(manifest_path(path));
    try {
      read_tracklets(path);
      CHECK(false);
    } catch (const IoError& e) {
      CHECK(e.code == IoError::Code::kBadManifest);
    }
  }

  std::filesystem::remove(path);
  std::filesystem::remove(manifest_path(path));
}
