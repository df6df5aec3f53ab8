#include "reid/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "reid/errors.hpp"

namespace reid {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'K', 'P'};
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

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw IoError(IoError::Code::kTruncated, "checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw IoError(IoError::Code::kTruncated, "checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const double* data,
                std::uint64_t rows, std::uint64_t cols) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u64(out, rows);
  put_u64(out, cols);
  for (std::uint64_t i = 0; i < rows * cols; ++i) put_f64(out, data[i]);
}

struct NamedTensor {
  std::uint64_t rows = 0, cols = 0;
  std::vector<double> values;
};

Vec to_vec(const NamedTensor& t) { return t.values; }

const NamedTensor& require(const std::map<std::string, NamedTensor>& tensors,
                           const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw IoError(IoError::Code::kTruncated, "checkpoint missing tensor: " + name);
  }
  return it->second;
}

Matrix to_matrix(const NamedTensor& t) {
  Matrix m(static_cast<int>(t.rows), static_cast<int>(t.cols));
  m.values = t.values;
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& cp, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoError::Code::kOpenFailed, "cannot open for writing: " + path);

  ModelParams model_view = cp.model;  // param_tensors needs mutable access
  std::vector<TensorRef> params = param_tensors(model_view);

  std::uint64_t count = params.size() * 3  // params + adam m/v
                        + 2                // bn running stats
                        + 1                // centers
                        + 1;               // metadata block
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, count);

  for (const TensorRef& t : params) put_tensor(out, t.name, t.data, 1, t.size);
  put_tensor(out, "bn.running_mean", cp.model.bn.running_mean.data(), 1,
             cp.model.bn.running_mean.size());
  put_tensor(out, "bn.running_var", cp.model.bn.running_var.data(), 1,
             cp.model.bn.running_var.size());
  put_tensor(out, "centers", cp.centers.centers.values.data(),
             static_cast<std::uint64_t>(cp.centers.centers.rows),
             static_cast<std::uint64_t>(cp.centers.centers.cols));
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_tensor(out, "opt.m." + params[i].name, cp.opt.m[i].data(), 1, cp.opt.m[i].size());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    put_tensor(out, "opt.v." + params[i].name, cp.opt.v[i].data(), 1, cp.opt.v[i].size());
  }

  // Integer metadata as exactly representable doubles; the digest is split
  // into two 32-bit halves.
  double meta[9] = {
      static_cast<double>(cp.epoch),
      static_cast<double>(cp.opt.step),
      static_cast<double>(cp.config_digest & 0xFFFFFFFFULL),
      static_cast<double>(cp.config_digest >> 32),
      cp.centers.update_rate,
      cp.model.bn.momentum,
      cp.model.bn.eps,
      static_cast<double>(cp.model.dims.d_raw),
      static_cast<double>(cp.model.dims.hidden),
  };
  put_tensor(out, "meta", meta, 1, 9);
  if (!out) throw IoError(IoError::Code::kWriteFailed, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoError::Code::kOpenFailed, "cannot open: " + path);

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4) throw IoError(IoError::Code::kTruncated, "checkpoint truncated");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(IoError::Code::kBadMagic, "bad magic in checkpoint: " + path);
  }
  std::uint32_t version = get_u32(in);
  if (version != kVersion) {
    throw IoError(IoError::Code::kBadVersion,
                  "unsupported checkpoint version " + std::to_string(version));
  }

  std::uint64_t count = get_u64(in);
  std::map<std::string, NamedTensor> tensors;
  for (std::uint64_t t = 0; t < count; ++t) {
    std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      throw IoError(IoError::Code::kTruncated, "checkpoint truncated");
    }
    NamedTensor nt;
    nt.rows = get_u64(in);
    nt.cols = get_u64(in);
    nt.values.resize(nt.rows * nt.cols);
    for (double& v : nt.values) {
      v = get_f64(in);
      if (!std::isfinite(v)) {
        throw NumericError("non-finite value in checkpoint tensor " + name);
      }
    }
    tensors[name] = std::move(nt);
  }

  const NamedTensor& meta = require(tensors, "meta");
  if (meta.values.size() != 9) {
    throw IoError(IoError::Code::kTruncated, "checkpoint metadata malformed");
  }

  Checkpoint cp;
  const NamedTensor& w1 = require(tensors, "enc.w1");
  const NamedTensor& w2 = require(tensors, "enc.w2");
  const NamedTensor& cls_w = require(tensors, "cls.w");
  cp.model.dims.d_raw = static_cast<int>(meta.values[7]);
  cp.model.dims.hidden = static_cast<int>(meta.values[8]);
  if (cp.model.dims.d_raw <= 0 || cp.model.dims.hidden <= 0 ||
      w1.values.size() !=
          static_cast<std::uint64_t>(cp.model.dims.d_raw) * cp.model.dims.hidden) {
    throw IoError(IoError::Code::kTruncated, "checkpoint encoder shape malformed");
  }
  cp.model.dims.embed = static_cast<int>(w2.values.size() / cp.model.dims.hidden);
  cp.model.dims.classes = static_cast<int>(cls_w.values.size() / cp.model.dims.embed);

  auto fill_matrix = [&](const std::string& name, int rows, int cols) {
    const NamedTensor& t = require(tensors, name);
    if (t.values.size() != static_cast<std::uint64_t>(rows) * cols) {
      throw IoError(IoError::Code::kTruncated, "checkpoint tensor shape mismatch: " + name);
    }
    Matrix m(rows, cols);
    m.values = t.values;
    return m;
  };

  const ModelDims& d = cp.model.dims;
  cp.model.enc.w1 = fill_matrix("enc.w1", d.hidden, d.d_raw);
  cp.model.enc.b1 = to_vec(require(tensors, "enc.b1"));
  cp.model.enc.w2 = fill_matrix("enc.w2", d.embed, d.hidden);
  cp.model.enc.b2 = to_vec(require(tensors, "enc.b2"));
  cp.model.att.w = to_vec(require(tensors, "att.w"));
  cp.model.att.b = require(tensors, "att.b").values.at(0);
  cp.model.bn.gamma = to_vec(require(tensors, "bn.gamma"));
  cp.model.bn.beta = to_vec(require(tensors, "bn.beta"));
  cp.model.bn.running_mean = to_vec(require(tensors, "bn.running_mean"));
  cp.model.bn.running_var = to_vec(require(tensors, "bn.running_var"));
  cp.model.cls.w = fill_matrix("cls.w", d.classes, d.embed);
  const NamedTensor& centers = require(tensors, "centers");
  cp.centers.centers = to_matrix(centers);

  cp.epoch = static_cast<int>(meta.values[0]);
  std::uint64_t digest_lo = static_cast<std::uint64_t>(meta.values[2]);
  std::uint64_t digest_hi = static_cast<std::uint64_t>(meta.values[3]);
  cp.config_digest = digest_lo | (digest_hi << 32);
  cp.centers.update_rate = meta.values[4];
  cp.model.bn.momentum = meta.values[5];
  cp.model.bn.eps = meta.values[6];

  std::vector<TensorRef> params = param_tensors(cp.model);
  cp.opt.step = static_cast<std::int64_t>(meta.values[1]);
  for (const TensorRef& p : params) {
    const NamedTensor& m = require(tensors, "opt.m." + p.name);
    const NamedTensor& v = require(tensors, "opt.v." + p.name);
    if (m.values.size() != p.size || v.values.size() != p.size) {
      throw IoError(IoError::Code::kTruncated,
                    "checkpoint optimizer tensor shape mismatch: " + p.name);
    }
    cp.opt.m.push_back(m.values);
    cp.opt.v.push_back(v.values);
  }
  return cp;
}

}  // namespace reid
