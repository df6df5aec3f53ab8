#include "reid/tracklet_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "reid/errors.hpp"

namespace reid {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw IoError(IoError::Code::kTruncated, "tracklet file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw IoError(IoError::Code::kTruncated, "tracklet file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

float get_f32(std::istream& in) {
  std::uint32_t bits = get_u32(in);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

std::string manifest_path(const std::string& data_path) {
  return data_path + ".manifest.json";
}

void write_tracklets(const Dataset& ds, const std::string& path) {
  if (ds.splits.size() != ds.tracklets.size()) {
    throw ConfigError("dataset has mismatched split tags");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Code::kOpenFailed, "cannot open for writing: " + path);

  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, ds.tracklets.size());
  for (const Tracklet& tr : ds.tracklets) {
    put_u32(out, static_cast<std::uint32_t>(tr.person_id));
    put_u32(out, static_cast<std::uint32_t>(tr.camera_id));
    put_u32(out, static_cast<std::uint32_t>(tr.frames.size()));
    int h = tr.frames.empty() ? 0 : tr.frames[0].h;
    int w = tr.frames.empty() ? 0 : tr.frames[0].w;
    put_u32(out, static_cast<std::uint32_t>(h));
    put_u32(out, static_cast<std::uint32_t>(w));
    for (const Frame& f : tr.frames) {
      if (f.h != h || f.w != w) {
        throw ConfigError("all frames in a tracklet must share H and W");
      }
      for (double v : f.values) put_f32(out, static_cast<float>(v));
    }
  }
  if (!out) throw IoError(IoError::Code::kWriteFailed, "write failed: " + path);
  out.close();

  nlohmann::json splits = nlohmann::json::object();
  for (std::size_t i = 0; i < ds.splits.size(); ++i) {
    splits[std::to_string(i)] = split_name(ds.splits[i]);
  }
  nlohmann::json manifest;
  manifest["splits"] = splits;
  std::ofstream mout(manifest_path(path), std::ios::trunc);
  if (!mout) {
    throw IoError(IoError::Code::kOpenFailed,
                  "cannot open for writing: " + manifest_path(path));
  }
  mout << manifest.dump(2) << "\n";
  if (!mout) throw IoError(IoError::Code::kWriteFailed, "write failed: " + manifest_path(path));
}

Dataset read_tracklets(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Code::kOpenFailed, "cannot open: " + path);

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw IoError(IoError::Code::kTruncated, "tracklet file truncated");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(IoError::Code::kBadMagic, "bad magic in tracklet file: " + path);
  }
  std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw IoError(IoError::Code::kBadVersion,
                  "unsupported tracklet file version " + std::to_string(version));
  }

  Dataset ds;
  std::uint64_t count = get_u64(in);
  ds.tracklets.reserve(count);
  for (std::uint64_t t = 0; t < count; ++t) {
    Tracklet tr;
    tr.person_id = static_cast<int>(get_u32(in));
    tr.camera_id = static_cast<int>(get_u32(in));
    std::uint32_t frames = get_u32(in);
    std::uint32_t h = get_u32(in);
    std::uint32_t w = get_u32(in);
    if (h < 2 || w < 2) {
      throw IoError(IoError::Code::kTruncated,
                    "tracklet " + std::to_string(t) + " has an invalid grid shape");
    }
    for (std::uint32_t fi = 0; fi < frames; ++fi) {
      Frame f;
      f.h = static_cast<int>(h);
      f.w = static_cast<int>(w);
      f.values.resize(static_cast<std::size_t>(h) * w);
      for (double& v : f.values) {
        float raw = get_f32(in);
        if (!std::isfinite(raw)) {
          throw NumericError("non-finite value in tracklet file: " + path);
        }
        v = static_cast<double>(raw);
      }
      tr.frames.push_back(std::move(f));
    }
    ds.tracklets.push_back(std::move(tr));
  }

  std::ifstream min(manifest_path(path));
  if (!min) {
    throw IoError(IoError::Code::kBadManifest,
                  "missing manifest: " + manifest_path(path));
  }
  nlohmann::json manifest;
  try {
    min >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(IoError::Code::kBadManifest,
                  std::string("unparsable manifest: ") + e.what());
  }
  if (!manifest.contains("splits") || !manifest["splits"].is_object()) {
    throw IoError(IoError::Code::kBadManifest, "manifest missing splits object");
  }
  ds.splits.assign(ds.tracklets.size(), Split::kTrain);
  std::vector<bool> seen(ds.tracklets.size(), false);
  for (auto& [key, value] : manifest["splits"].items()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(key);
    } catch (...) {
      throw IoError(IoError::Code::kBadManifest, "manifest key is not an index: " + key);
    }
    if (idx >= ds.tracklets.size()) {
      throw IoError(IoError::Code::kBadManifest, "manifest index out of range: " + key);
    }
    try {
      ds.splits[idx] = split_from_name(value.get<std::string>());
    } catch (const ConfigError& e) {
      throw IoError(IoError::Code::kBadManifest, e.what());
    }
    seen[idx] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) {
      throw IoError(IoError::Code::kBadManifest,
                    "manifest missing split for tracklet " + std::to_string(i));
    }
  }
  return ds;
}

}  // namespace reid
