#pragma once

#include <string>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/matrix.hpp"
#include "reid/numerics.hpp"
#include "reid/random.hpp"

namespace reid {

// Two affine layers with a tanh in between; stands in for a per-frame
// feature backbone. w1 is hidden×d_raw, w2 is embed×hidden (row = output
// unit), so a batch X (rows = frames) maps as tanh(X·w1ᵀ + b1)·w2ᵀ + b2.
struct EncoderParams {
  Matrix w1;
  Vec b1;
  Matrix w2;
  Vec b2;
};

// Per-frame scorer: logit = ⟨w, feature⟩ + b.
struct AttentionParams {
  Vec w;
  double b = 0.0;
};

struct ClassifierParams {
  Matrix w;  // classes × embed, no bias
};

struct ModelDims {
  int d_raw = 64;
  int hidden = 64;
  int embed = 32;
  int classes = 2;
};

struct ModelParams {
  ModelDims dims;
  EncoderParams enc;
  AttentionParams att;
  BatchNormState bn;
  ClassifierParams cls;

  // Xavier-uniform weights, zero biases, identity BN affine.
  static ModelParams init(const ModelDims& dims, RandomStream& rng);
};

struct EncodeCache {
  Matrix x_raw;     // rows × d_raw (flattened frames)
  Matrix z1, a1;    // rows × hidden (pre/post tanh)
  Matrix features;  // rows × embed
};

// Frames of a batch flattened row-major into one matrix, clip-major order.
Matrix flatten_frames(const ClipBatch& batch, int d_raw);

EncodeCache encode_frames(const EncoderParams& enc, const Matrix& x_raw);

struct PoolResult {
  Vec clip_feature;  // embed
  Vec logits;        // pre-softmax scorer outputs, one per frame
  Vec scores;        // softmax weights, sum to 1
};

// Weighted sum of one clip's frame features under softmax attention scores.
PoolResult attention_pool(const AttentionParams& att, const Matrix& clip_features);

struct ForwardCache {
  int clips = 0;       // B = P*K
  int frames_per_clip = 0;
  bool train_mode = false;
  EncodeCache enc;
  Matrix att_logits;   // B × N
  Matrix att_scores;   // B × N
  Matrix features;     // B × embed, pre-BN (metric losses read these)
  BatchNormResult bn;  // train-mode internals; infer fills only y
  Matrix features_bn;  // B × embed, post-BN (classifier and eval read these)
  Matrix logits;       // B × classes
};

ForwardCache forward(const ModelParams& model, const ClipBatch& batch, Mode mode);

struct ParamGrads {
  Matrix w1;
  Vec b1;
  Matrix w2;
  Vec b2;
  Vec att_w;
  double att_b = 0.0;
  Vec gamma, beta;
  Matrix cls_w;

  static ParamGrads zeros_like(const ModelParams& model);
};

// Accumulates head gradients (classifier logits, pre-BN features, attention
// scores) back to every trainable parameter. Pass zero matrices for heads a
// recipe does not use.
ParamGrads backward(const ModelParams& model, const ForwardCache& cache,
                    const Matrix& d_logits, const Matrix& d_features,
                    const Matrix& d_scores);

// Named views over the trainable tensors, in canonical order (the BN running
// stats and loss centers are not optimizer parameters).
struct TensorRef {
  std::string name;
  double* data;
  std::size_t size;
};

std::vector<TensorRef> param_tensors(ModelParams& model);
std::vector<TensorRef> grad_tensors(ParamGrads& grads);

}  // namespace reid
