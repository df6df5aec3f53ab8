#include "reid/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include "reid/errors.hpp"
#include "reid/kernels.hpp"

namespace reid {

Embeddings embed_clips(const ModelParams& model, const Dataset& ds, Split split,
                       int n_frames, std::uint64_t seed) {
  std::vector<int> indices = ds.indices_of(split);
  if (indices.empty()) throw ConfigError("embed_clips: split is empty");
  if (n_frames < 1) throw ConfigError("embed_clips: n_frames must be positive");

  const int count = static_cast<int>(indices.size());
  const int d_raw = model.dims.d_raw;
  RandomStream root(seed);

  Matrix x_raw(count * n_frames, d_raw);
  Embeddings out;
  for (int c = 0; c < count; ++c) {
    const Tracklet& tr = ds.tracklets[indices[c]];
    RandomStream rng = root.split(static_cast<std::uint64_t>(indices[c]));
    std::vector<int> frame_idx = sample_frames(tr, n_frames, rng);
    for (int i = 0; i < n_frames; ++i) {
      const Frame& f = tr.frames[frame_idx[i]];
      if (static_cast<int>(f.values.size()) != d_raw) {
        throw ConfigError("embed_clips: frame size does not match the model");
      }
      double* dst = x_raw.row(c * n_frames + i);
      for (int k = 0; k < d_raw; ++k) dst[k] = f.values[k];
    }
    out.meta.push_back({indices[c], tr.person_id, tr.camera_id});
  }

  EncodeCache enc = encode_frames(model.enc, x_raw);
  Matrix pooled(count, model.dims.embed);
  for (int c = 0; c < count; ++c) {
    Matrix block(n_frames, model.dims.embed);
    for (int i = 0; i < n_frames; ++i) {
      const double* src = enc.features.row(c * n_frames + i);
      double* dst = block.row(i);
      for (int k = 0; k < model.dims.embed; ++k) dst[k] = src[k];
    }
    PoolResult res = attention_pool(model.att, block);
    for (int k = 0; k < model.dims.embed; ++k) pooled(c, k) = res.clip_feature[k];
  }
  out.features = batch_norm_infer(pooled, model.bn);
  return out;
}

double Scores::cmc_at(int rank) const {
  if (cmc.empty() || rank < 1) return 0.0;
  int idx = std::min(rank, static_cast<int>(cmc.size())) - 1;
  return cmc[idx];
}

Scores cmc_map(const Matrix& dist_qg, const std::vector<EvalEntry>& queries,
               const std::vector<EvalEntry>& gallery) {
  const int q = dist_qg.rows;
  const int g = dist_qg.cols;
  if (q != static_cast<int>(queries.size()) || g != static_cast<int>(gallery.size())) {
    throw ConfigError("cmc_map: metadata does not match the distance matrix");
  }
  if (g < 1) throw ConfigError("cmc_map: empty gallery");
  for (double v : dist_qg.values) {
    if (!std::isfinite(v)) throw NumericError("cmc_map: non-finite distance");
  }

  std::vector<int> first_hit(q, 0);  // 1-based rank of first correct match
  std::vector<double> ap(q, 0.0);
  std::vector<char> valid(q, 0);

#pragma omp parallel for schedule(static)
  for (int qi = 0; qi < q; ++qi) {
    std::vector<int> keep;
    keep.reserve(g);
    int positives = 0;
    for (int gi = 0; gi < g; ++gi) {
      bool junk = gallery[gi].person_id == queries[qi].person_id &&
                  gallery[gi].camera_id == queries[qi].camera_id;
      if (junk) continue;
      keep.push_back(gi);
      if (gallery[gi].person_id == queries[qi].person_id) ++positives;
    }
    if (positives == 0) continue;  // skipped query
    std::sort(keep.begin(), keep.end(), [&](int a, int b) {
      double da = dist_qg(qi, a), db = dist_qg(qi, b);
      return da < db || (da == db && a < b);
    });
    int hits = 0;
    double ap_sum = 0.0;
    int first = 0;
    for (std::size_t pos = 0; pos < keep.size(); ++pos) {
      if (gallery[keep[pos]].person_id != queries[qi].person_id) continue;
      ++hits;
      if (first == 0) first = static_cast<int>(pos) + 1;
      ap_sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
    valid[qi] = 1;
    first_hit[qi] = first;
    ap[qi] = ap_sum / positives;
  }

  Scores s;
  s.cmc.assign(g, 0.0);
  double ap_total = 0.0;
  for (int qi = 0; qi < q; ++qi) {
    if (!valid[qi]) continue;
    ++s.num_valid_queries;
    ap_total += ap[qi];
    s.cmc[first_hit[qi] - 1] += 1.0;
  }
  if (s.num_valid_queries == 0) return s;
  double cumulative = 0.0;
  for (int k = 0; k < g; ++k) {
    cumulative += s.cmc[k];
    s.cmc[k] = cumulative / s.num_valid_queries;
  }
  s.map = ap_total / s.num_valid_queries;
  return s;
}

Matrix k_reciprocal_rerank(const Matrix& dist_qg, const Matrix& dist_qq,
                           const Matrix& dist_gg, int k1, int k2, double lambda) {
  const int q = dist_qg.rows;
  const int g = dist_qg.cols;
  const int n = q + g;
  if (dist_qq.rows != q || dist_qq.cols != q || dist_gg.rows != g || dist_gg.cols != g) {
    throw ConfigError("k_reciprocal_rerank: inconsistent distance matrices");
  }
  if (k2 < 1 || k1 <= k2) throw ConfigError("k_reciprocal_rerank: needs k1 > k2 >= 1");
  if (k1 >= n) throw ConfigError("k_reciprocal_rerank: k1 must be below Q+G");
  if (lambda < 0.0 || lambda > 1.0) {
    throw ConfigError("k_reciprocal_rerank: lambda must be in [0, 1]");
  }

  Matrix u(n, n);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) u(i, j) = dist_qq(i, j);
    for (int j = 0; j < g; ++j) u(i, q + j) = dist_qg(i, j);
  }
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < q; ++j) u(q + i, j) = dist_qg(j, i);
    for (int j = 0; j < g; ++j) u(q + i, q + j) = dist_gg(i, j);
  }

  // Ascending argsort per row (ties by index) plus the inverse permutation.
  std::vector<std::vector<int>> rank(n, std::vector<int>(n));
  std::vector<std::vector<int>> pos(n, std::vector<int>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) rank[i][j] = j;
    std::sort(rank[i].begin(), rank[i].end(), [&](int a, int b) {
      return u(i, a) < u(i, b) || (u(i, a) == u(i, b) && a < b);
    });
    for (int j = 0; j < n; ++j) pos[i][rank[i][j]] = j;
  }

  auto reciprocal_set = [&](int i, int k) {
    std::vector<int> out;
    for (int j = 0; j <= k; ++j) {
      int cand = rank[i][j];
      if (pos[cand][i] <= k) out.push_back(cand);
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  const int k_half = k1 / 2;
  Matrix v(n, n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    std::vector<int> base = reciprocal_set(i, k1);
    std::vector<int> expanded = base;
    for (int cand : base) {
      std::vector<int> cand_set = reciprocal_set(cand, k_half);
      std::vector<int> inter;
      std::set_intersection(cand_set.begin(), cand_set.end(), base.begin(),
                            base.end(), std::back_inserter(inter));
      if (static_cast<double>(inter.size()) >
          (2.0 / 3.0) * static_cast<double>(cand_set.size())) {
        expanded.insert(expanded.end(), cand_set.begin(), cand_set.end());
      }
    }
    std::sort(expanded.begin(), expanded.end());
    expanded.erase(std::unique(expanded.begin(), expanded.end()), expanded.end());
    double total = 0.0;
    for (int j : expanded) total += std::exp(-u(i, j));
    for (int j : expanded) v(i, j) = std::exp(-u(i, j)) / total;
  }

  if (k2 > 1) {
    Matrix v_qe(n, n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      for (int m = 0; m < k2; ++m) {
        const double* src = v.row(rank[i][m]);
        double* dst = v_qe.row(i);
        for (int j = 0; j < n; ++j) dst[j] += src[j] / k2;
      }
    }
    v = std::move(v_qe);
  }

  Matrix final_dist(q, g);
#pragma omp parallel for schedule(static)
  for (int qi = 0; qi < q; ++qi) {
    const double* vq = v.row(qi);
    for (int gi = 0; gi < g; ++gi) {
      const double* vg = v.row(q + gi);
      double min_sum = 0.0;
      for (int j = 0; j < n; ++j) min_sum += std::min(vq[j], vg[j]);
      double jaccard = 1.0 - min_sum / (2.0 - min_sum);
      final_dist(qi, gi) = lambda * dist_qg(qi, gi) + (1.0 - lambda) * jaccard;
    }
  }
  return final_dist;
}

EvalResult evaluate(const ModelParams& model, const Dataset& ds,
                    const EvalConfig& config) {
  Embeddings queries = embed_clips(model, ds, Split::kTestQuery, config.n_frames,
                                   config.seed);
  Embeddings gallery = embed_clips(model, ds, Split::kTestGallery, config.n_frames,
                                   config.seed);
  const int q = queries.features.rows;
  const int g = gallery.features.rows;

  Matrix stacked(q + g, model.dims.embed);
  for (int i = 0; i < q; ++i) {
    for (int k = 0; k < model.dims.embed; ++k) stacked(i, k) = queries.features(i, k);
  }
  for (int i = 0; i < g; ++i) {
    for (int k = 0; k < model.dims.embed; ++k) {
      stacked(q + i, k) = gallery.features(i, k);
    }
  }
  Matrix all_dist = kernels::pairwise_distance(stacked, Metric::kEuclidean);
  Matrix d_qg(q, g), d_qq(q, q), d_gg(g, g);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < q; ++j) d_qq(i, j) = all_dist(i, j);
    for (int j = 0; j < g; ++j) d_qg(i, j) = all_dist(i, q + j);
  }
  for (int i = 0; i < g; ++i) {
    for (int j = 0; j < g; ++j) d_gg(i, j) = all_dist(q + i, q + j);
  }

  EvalResult result;
  result.plain = cmc_map(d_qg, queries.meta, gallery.meta);
  if (config.rerank) {
    // Scale the neighborhood down on small galleries.
    int k1 = std::max(2, std::min(config.k1, g - 1));
    int k2 = std::max(1, std::min(config.k2, k1 - 1));
    Matrix reranked = k_reciprocal_rerank(d_qg, d_qq, d_gg, k1, k2, config.lambda);
    result.reranked = cmc_map(reranked, queries.meta, gallery.meta);
  }
  return result;
}

}  // namespace reid
