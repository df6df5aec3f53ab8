#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/matrix.hpp"
#include "reid/model.hpp"

namespace reid {

struct EvalEntry {
  int tracklet_index = 0;
  int person_id = 0;
  int camera_id = 0;
};

struct Embeddings {
  Matrix features;  // one post-BN clip embedding per row
  std::vector<EvalEntry> meta;
};

// Samples N frames per tracklet (stream split by tracklet index, so a
// tracklet embeds identically regardless of split grouping), runs the model
// in infer mode and returns post-BN clip features.
Embeddings embed_clips(const ModelParams& model, const Dataset& ds, Split split,
                       int n_frames, std::uint64_t seed);

struct Scores {
  double map = 0.0;
  std::vector<double> cmc;  // full curve, cmc[k-1] = CMC-k
  int num_valid_queries = 0;

  double cmc_at(int rank) const;
};

// Single-shot retrieval metrics under the cross-camera protocol: gallery
// entries sharing both person and camera with the query are junk, queries
// with no remaining positive are skipped. Distance ties break by gallery
// index.
Scores cmc_map(const Matrix& dist_qg, const std::vector<EvalEntry>& queries,
               const std::vector<EvalEntry>& gallery);

// k-reciprocal re-ranking over the union distance matrix: reciprocal
// neighbor sets expanded by half-k1 candidates at 2/3 overlap,
// exp(-d)-weighted membership vectors, local query expansion over k2, and a
// Jaccard blend: final = lambda*original + (1-lambda)*jaccard.
Matrix k_reciprocal_rerank(const Matrix& dist_qg, const Matrix& dist_qq,
                           const Matrix& dist_gg, int k1, int k2, double lambda);

struct EvalConfig {
  int n_frames = 4;
  std::uint64_t seed = 0;
  std::vector<int> ranks = {1, 5, 20};
  bool rerank = true;
  int k1 = 20;
  int k2 = 6;
  double lambda = 0.3;
};

struct EvalResult {
  Scores plain;
  std::optional<Scores> reranked;
};

EvalResult evaluate(const ModelParams& model, const Dataset& ds,
                    const EvalConfig& config);

}  // namespace reid
