#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace oracle {

std::vector<double> finite_difference(std::vector<double>& params,
                                      const std::function<double()>& scalar_fn,
                                      double step) {
  std::vector<double> grads(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double saved = params[i];
    params[i] = saved + step;
    double up = scalar_fn();
    params[i] = saved - step;
    double down = scalar_fn();
    params[i] = saved;
    grads[i] = (up - down) / (2.0 * step);
  }
  return grads;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    // Gradients that vanish identically (softmax shift invariance) leave both
    // sides at floating-point noise; absolute agreement below 1e-7 counts as
    // an exact match.
    if (std::abs(a[i] - b[i]) <= 1e-7) continue;
    double rel = std::abs(a[i] - b[i]) /
                 std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    worst = std::max(worst, rel);
  }
  return worst;
}

BruteScores brute_cmc_map(const reid::Matrix& dist_qg,
                          const std::vector<reid::EvalEntry>& queries,
                          const std::vector<reid::EvalEntry>& gallery) {
  const int q = dist_qg.rows;
  const int g = dist_qg.cols;
  BruteScores out;
  out.cmc.assign(g, 0.0);
  std::vector<int> hit_counts(g, 0);
  double ap_sum = 0.0;

  for (int qi = 0; qi < q; ++qi) {
    // Candidates after junk removal.
    std::vector<int> candidates;
    for (int gi = 0; gi < g; ++gi) {
      if (gallery[gi].person_id == queries[qi].person_id &&
          gallery[gi].camera_id == queries[qi].camera_id) {
        continue;
      }
      candidates.push_back(gi);
    }
    int total_positives = 0;
    for (int gi : candidates) {
      if (gallery[gi].person_id == queries[qi].person_id) ++total_positives;
    }
    if (total_positives == 0) continue;

    // Selection sort by (distance, index).
    std::vector<int> ranking;
    std::vector<bool> used(candidates.size(), false);
    for (std::size_t round = 0; round < candidates.size(); ++round) {
      int best = -1;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        if (used[c]) continue;
        if (best < 0) {
          best = static_cast<int>(c);
          continue;
        }
        double db = dist_qg(qi, candidates[best]);
        double dc = dist_qg(qi, candidates[c]);
        if (dc < db || (dc == db && candidates[c] < candidates[best])) {
          best = static_cast<int>(c);
        }
      }
      used[best] = true;
      ranking.push_back(candidates[best]);
    }

    // Precision recomputed by explicit counting at every hit position.
    double ap = 0.0;
    int first_hit = 0;
    for (std::size_t pos = 0; pos < ranking.size(); ++pos) {
      if (gallery[ranking[pos]].person_id != queries[qi].person_id) continue;
      if (first_hit == 0) first_hit = static_cast<int>(pos) + 1;
      int correct_so_far = 0;
      for (std::size_t p2 = 0; p2 <= pos; ++p2) {
        if (gallery[ranking[p2]].person_id == queries[qi].person_id) {
          ++correct_so_far;
        }
      }
      ap += static_cast<double>(correct_so_far) / static_cast<double>(pos + 1);
    }
    ap /= total_positives;

    out.num_valid_queries += 1;
    ap_sum += ap;
    hit_counts[first_hit - 1] += 1;
  }

  if (out.num_valid_queries == 0) return out;
  int cumulative = 0;
  for (int k = 0; k < g; ++k) {
    cumulative += hit_counts[k];
    out.cmc[k] = static_cast<double>(cumulative) / out.num_valid_queries;
  }
  out.map = ap_sum / out.num_valid_queries;
  return out;
}

namespace {

// First k+1 entries of the ascending ranking of row i (ties by index).
std::vector<int> forward_neighbors(const reid::Matrix& u, int i, int k) {
  const int n = u.rows;
  std::vector<int> order(n);
  for (int j = 0; j < n; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (u(i, a) != u(i, b)) return u(i, a) < u(i, b);
    return a < b;
  });
  return std::vector<int>(order.begin(), order.begin() + k + 1);
}

std::set<int> reciprocal_neighbors(const reid::Matrix& u, int i, int k) {
  std::set<int> out;
  for (int j : forward_neighbors(u, i, k)) {
    std::vector<int> back = forward_neighbors(u, j, k);
    if (std::find(back.begin(), back.end(), i) != back.end()) out.insert(j);
  }
  return out;
}

}  // namespace

reid::Matrix brute_k_reciprocal(const reid::Matrix& dist_qg,
                                const reid::Matrix& dist_qq,
                                const reid::Matrix& dist_gg, int k1, int k2,
                                double lambda) {
  const int q = dist_qg.rows;
  const int g = dist_qg.cols;
  const int n = q + g;

  reid::Matrix u(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double v;
      if (i < q && j < q) {
        v = dist_qq(i, j);
      } else if (i < q) {
        v = dist_qg(i, j - q);
      } else if (j < q) {
        v = dist_qg(j, i - q);
      } else {
        v = dist_gg(i - q, j - q);
      }
      u(i, j) = v;
    }
  }

  std::vector<std::set<int>> expanded(n);
  for (int i = 0; i < n; ++i) {
    std::set<int> base = reciprocal_neighbors(u, i, k1);
    std::set<int> result = base;
    for (int cand : base) {
      std::set<int> cand_set = reciprocal_neighbors(u, cand, k1 / 2);
      std::set<int> inter;
      for (int x : cand_set) {
        if (base.count(x)) inter.insert(x);
      }
      if (static_cast<double>(inter.size()) >
          (2.0 / 3.0) * static_cast<double>(cand_set.size())) {
        result.insert(cand_set.begin(), cand_set.end());
      }
    }
    expanded[i] = result;
  }

  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    double total = 0.0;
    for (int j : expanded[i]) total += std::exp(-u(i, j));
    for (int j : expanded[i]) v[i][j] = std::exp(-u(i, j)) / total;
  }

  if (k2 > 1) {
    std::vector<std::vector<double>> v_qe(n, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      std::vector<int> nearest = forward_neighbors(u, i, k2 - 1);  // k2 entries
      for (int m : nearest) {
        for (int j = 0; j < n; ++j) v_qe[i][j] += v[m][j] / k2;
      }
    }
    v = v_qe;
  }

  reid::Matrix final_dist(q, g);
  for (int qi = 0; qi < q; ++qi) {
    for (int gi = 0; gi < g; ++gi) {
      double min_sum = 0.0, max_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        min_sum += std::min(v[qi][j], v[q + gi][j]);
        max_sum += std::max(v[qi][j], v[q + gi][j]);
      }
      double jaccard = max_sum > 0.0 ? 1.0 - min_sum / max_sum : 0.0;
      final_dist(qi, gi) = lambda * dist_qg(qi, gi) + (1.0 - lambda) * jaccard;
    }
  }
  return final_dist;
}

double brute_osm(const std::vector<std::vector<double>>& features,
                 const std::vector<int>& labels,
                 const std::vector<std::vector<double>>& class_vectors,
                 double sigma, double alpha, double balance) {
  const int b = static_cast<int>(features.size());
  const int d = static_cast<int>(features[0].size());

  auto normalize = [d](const std::vector<double>& x) {
    double norm = 0.0;
    for (double v : x) norm += v * v;
    norm = std::sqrt(norm);
    std::vector<double> out(d, 0.0);
    if (norm < 1e-12) return out;
    for (int k = 0; k < d; ++k) out[k] = x[k] / norm;
    return out;
  };

  std::vector<std::vector<double>> unit(b);
  std::vector<double> att(b);
  for (int i = 0; i < b; ++i) {
    unit[i] = normalize(features[i]);
    std::vector<double> cv = normalize(class_vectors[labels[i]]);
    double raw = 0.0;
    for (int k = 0; k < d; ++k) raw += unit[i][k] * cv[k];
    att[i] = std::min(1.0, std::max(0.0, raw));
  }

  double np = 0.0, dp = 0.0, nn = 0.0, dn = 0.0;
  bool has_pos = false, has_neg = false;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      if (i == j) continue;
      double d2 = 0.0;
      for (int k = 0; k < d; ++k) {
        double diff = unit[i][k] - unit[j][k];
        d2 += diff * diff;
      }
      double dist = std::sqrt(std::max(d2, 1e-12));
      double a = att[i] * att[j];
      if (labels[i] == labels[j]) {
        has_pos = true;
        double s = std::exp(-d2 / (sigma * sigma));
        np += a * s * d2;
        dp += a * s;
      } else {
        has_neg = true;
        double s = std::max(alpha - dist, 0.0);
        nn += a * s * s;
        dn += a;
      }
    }
  }
  double l_pos = has_pos ? np / std::max(dp, 1e-12) : 0.0;
  double l_neg = has_neg ? nn / std::max(dn, 1e-12) : 0.0;
  return (1.0 - balance) * l_pos + balance * l_neg;
}

reid::Matrix random_matrix(int rows, int cols, reid::RandomStream& rng,
                           double scale) {
  reid::Matrix m(rows, cols);
  for (auto& v : m.values) v = scale * rng.next_normal();
  return m;
}

}  // namespace oracle
