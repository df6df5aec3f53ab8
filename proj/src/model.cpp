#include "reid/model.hpp"

#include <cmath>

#include "reid/errors.hpp"
#include "reid/kernels.hpp"

namespace reid {

namespace {

Matrix xavier_uniform(int rows, int cols, RandomStream& rng) {
  double limit = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (std::int64_t i = 0; i < m.size(); ++i) {
    m.values[i] = rng.next_uniform(-limit, limit);
  }
  return m;
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, RandomStream& rng) {
  if (dims.d_raw < 1 || dims.hidden < 1 || dims.embed < 1 || dims.classes < 2) {
    throw ConfigError("model dims must be positive with at least 2 classes");
  }
  ModelParams m;
  m.dims = dims;
  m.enc.w1 = xavier_uniform(dims.hidden, dims.d_raw, rng);
  m.enc.b1.assign(dims.hidden, 0.0);
  m.enc.w2 = xavier_uniform(dims.embed, dims.hidden, rng);
  m.enc.b2.assign(dims.embed, 0.0);
  Matrix att_w = xavier_uniform(1, dims.embed, rng);
  m.att.w.assign(att_w.values.begin(), att_w.values.end());
  m.att.b = 0.0;
  m.bn = BatchNormState::identity(dims.embed);
  m.cls.w = xavier_uniform(dims.classes, dims.embed, rng);
  return m;
}

Matrix flatten_frames(const ClipBatch& batch, int d_raw) {
  int rows = 0;
  for (const Clip& c : batch.clips) rows += static_cast<int>(c.frames.size());
  Matrix x(rows, d_raw);
  int r = 0;
  for (const Clip& c : batch.clips) {
    for (const Frame& f : c.frames) {
      if (static_cast<int>(f.values.size()) != d_raw) {
        throw ConfigError("frame grid size does not match encoder input size");
      }
      double* dst = x.row(r++);
      for (int i = 0; i < d_raw; ++i) dst[i] = f.values[i];
    }
  }
  return x;
}

EncodeCache encode_frames(const EncoderParams& enc, const Matrix& x_raw) {
  if (x_raw.cols != enc.w1.cols) {
    throw ConfigError("encode_frames: input width does not match w1");
  }
  EncodeCache cache;
  cache.x_raw = x_raw;
  cache.z1 = kernels::matmul_a_bt(x_raw, enc.w1);
  kernels::add_row_bias(cache.z1, enc.b1);
  cache.a1 = kernels::tanh_map(cache.z1);
  cache.features = kernels::matmul_a_bt(cache.a1, enc.w2);
  kernels::add_row_bias(cache.features, enc.b2);
  return cache;
}

PoolResult attention_pool(const AttentionParams& att, const Matrix& clip_features) {
  const int n = clip_features.rows;
  const int d = clip_features.cols;
  if (n < 1) throw ConfigError("attention_pool: need at least one frame");
  if (static_cast<int>(att.w.size()) != d) {
    throw ConfigError("attention_pool: scorer width mismatch");
  }
  PoolResult out;
  out.logits.resize(n);
  for (int i = 0; i < n; ++i) {
    const double* f = clip_features.row(i);
    double s = att.b;
    for (int k = 0; k < d; ++k) s += att.w[k] * f[k];
    out.logits[i] = s;
  }
  out.scores = softmax(out.logits);
  out.clip_feature.assign(d, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* f = clip_features.row(i);
    for (int k = 0; k < d; ++k) out.clip_feature[k] += out.scores[i] * f[k];
  }
  return out;
}

ForwardCache forward(const ModelParams& model, const ClipBatch& batch, Mode mode) {
  const int b = static_cast<int>(batch.clips.size());
  if (b < 1) throw ConfigError("forward: empty batch");
  if (mode == Mode::kTrain && b < 2) {
    throw ConfigError("forward: train mode needs at least 2 clips for batch norm");
  }
  const int n = batch.n;
  for (const Clip& c : batch.clips) {
    if (static_cast<int>(c.frames.size()) != n) {
      throw ConfigError("forward: clip frame count does not match batch N");
    }
  }

  ForwardCache cache;
  cache.clips = b;
  cache.frames_per_clip = n;
  cache.train_mode = (mode == Mode::kTrain);
  cache.enc = encode_frames(model.enc, flatten_frames(batch, model.dims.d_raw));

  cache.att_logits = Matrix(b, n);
  cache.att_scores = Matrix(b, n);
  cache.features = Matrix(b, model.dims.embed);
  for (int c = 0; c < b; ++c) {
    Matrix block(n, model.dims.embed);
    for (int i = 0; i < n; ++i) {
      const double* src = cache.enc.features.row(c * n + i);
      double* dst = block.row(i);
      for (int k = 0; k < model.dims.embed; ++k) dst[k] = src[k];
    }
    PoolResult pooled = attention_pool(model.att, block);
    for (int i = 0; i < n; ++i) {
      cache.att_logits(c, i) = pooled.logits[i];
      cache.att_scores(c, i) = pooled.scores[i];
    }
    for (int k = 0; k < model.dims.embed; ++k) {
      cache.features(c, k) = pooled.clip_feature[k];
    }
  }

  if (mode == Mode::kTrain) {
    cache.bn = batch_norm_train(cache.features, model.bn);
    cache.features_bn = cache.bn.y;
  } else {
    cache.features_bn = batch_norm_infer(cache.features, model.bn);
  }
  cache.logits = kernels::matmul_a_bt(cache.features_bn, model.cls.w);
  return cache;
}

ParamGrads ParamGrads::zeros_like(const ModelParams& model) {
  ParamGrads g;
  g.w1 = Matrix(model.enc.w1.rows, model.enc.w1.cols);
  g.b1.assign(model.enc.b1.size(), 0.0);
  g.w2 = Matrix(model.enc.w2.rows, model.enc.w2.cols);
  g.b2.assign(model.enc.b2.size(), 0.0);
  g.att_w.assign(model.att.w.size(), 0.0);
  g.att_b = 0.0;
  g.gamma.assign(model.bn.gamma.size(), 0.0);
  g.beta.assign(model.bn.beta.size(), 0.0);
  g.cls_w = Matrix(model.cls.w.rows, model.cls.w.cols);
  return g;
}

ParamGrads backward(const ModelParams& model, const ForwardCache& cache,
                    const Matrix& d_logits, const Matrix& d_features,
                    const Matrix& d_scores) {
  const int b = cache.clips;
  const int n = cache.frames_per_clip;
  const int d = model.dims.embed;
  if (!cache.train_mode) {
    throw ConfigError("backward: cache must come from a train-mode forward");
  }
  if (cache.logits.empty() || cache.features.empty() || cache.att_scores.empty()) {
    throw ConfigError("backward: incomplete forward cache");
  }
  if (d_logits.rows != b || d_logits.cols != model.dims.classes ||
      d_features.rows != b || d_features.cols != d || d_scores.rows != b ||
      d_scores.cols != n) {
    throw ConfigError("backward: upstream gradient shape mismatch");
  }

  ParamGrads g = ParamGrads::zeros_like(model);

  // Classifier: logits = F_bn · Wᵀ.
  g.cls_w = kernels::matmul_at_b(d_logits, cache.features_bn);
  Matrix d_fbn = kernels::matmul(d_logits, model.cls.w);

  // BN-neck; metric-loss gradients enter below it, on the pre-BN features.
  BatchNormGrads bn_grads = batch_norm_train_backward(d_fbn, cache.bn, model.bn);
  g.gamma = bn_grads.dgamma;
  g.beta = bn_grads.dbeta;
  Matrix d_fpre = bn_grads.dx;
  for (std::int64_t i = 0; i < d_fpre.size(); ++i) {
    d_fpre.values[i] += d_features.values[i];
  }

  // Attention pooling, per clip.
  Matrix d_frame_features(b * n, d);
  for (int c = 0; c < b; ++c) {
    const double* d_clip = d_fpre.row(c);
    Vec gs(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* f = cache.enc.features.row(c * n + i);
      double acc = d_scores(c, i);
      for (int k = 0; k < d; ++k) acc += d_clip[k] * f[k];
      gs[i] = acc;
    }
    Vec scores(cache.att_scores.row(c), cache.att_scores.row(c) + n);
    Vec gz = softmax_backward(scores, gs);
    for (int i = 0; i < n; ++i) {
      const double* f = cache.enc.features.row(c * n + i);
      double* df = d_frame_features.row(c * n + i);
      for (int k = 0; k < d; ++k) {
        g.att_w[k] += gz[i] * f[k];
        df[k] = scores[i] * d_clip[k] + gz[i] * model.att.w[k];
      }
      g.att_b += gz[i];
    }
  }

  // Encoder: features = tanh(X·w1ᵀ + b1)·w2ᵀ + b2.
  g.w2 = kernels::matmul_at_b(d_frame_features, cache.enc.a1);
  for (int i = 0; i < d_frame_features.rows; ++i) {
    const double* row = d_frame_features.row(i);
    for (int k = 0; k < d; ++k) g.b2[k] += row[k];
  }
  Matrix d_a1 = kernels::matmul(d_frame_features, model.enc.w2);
  Matrix d_z1 = tanh_backward(cache.enc.a1, d_a1);
  g.w1 = kernels::matmul_at_b(d_z1, cache.enc.x_raw);
  for (int i = 0; i < d_z1.rows; ++i) {
    const double* row = d_z1.row(i);
    for (int k = 0; k < d_z1.cols; ++k) g.b1[k] += row[k];
  }
  return g;
}

std::vector<TensorRef> param_tensors(ModelParams& m) {
  return {
      {"enc.w1", m.enc.w1.values.data(), m.enc.w1.values.size()},
      {"enc.b1", m.enc.b1.data(), m.enc.b1.size()},
      {"enc.w2", m.enc.w2.values.data(), m.enc.w2.values.size()},
      {"enc.b2", m.enc.b2.data(), m.enc.b2.size()},
      {"att.w", m.att.w.data(), m.att.w.size()},
      {"att.b", &m.att.b, 1},
      {"bn.gamma", m.bn.gamma.data(), m.bn.gamma.size()},
      {"bn.beta", m.bn.beta.data(), m.bn.beta.size()},
      {"cls.w", m.cls.w.values.data(), m.cls.w.values.size()},
  };
}

std::vector<TensorRef> grad_tensors(ParamGrads& g) {
  return {
      {"enc.w1", g.w1.values.data(), g.w1.values.size()},
      {"enc.b1", g.b1.data(), g.b1.size()},
      {"enc.w2", g.w2.values.data(), g.w2.values.size()},
      {"enc.b2", g.b2.data(), g.b2.size()},
      {"att.w", g.att_w.data(), g.att_w.size()},
      {"att.b", &g.att_b, 1},
      {"bn.gamma", g.gamma.data(), g.gamma.size()},
      {"bn.beta", g.beta.data(), g.beta.size()},
      {"cls.w", g.cls_w.values.data(), g.cls_w.values.size()},
  };
}

}  // namespace reid
