#include "reid/losses.hpp"

#include <algorithm>
#include <cmath>

#include "reid/errors.hpp"
#include "reid/kernels.hpp"

namespace reid {

namespace {
constexpr double kMaskFloor = 1e-12;
constexpr double kDistFloor = 1e-12;

void check_labels(const std::vector<int>& labels, int batch, int max_classes) {
  if (static_cast<int>(labels.size()) != batch) {
    throw ConfigError("label count does not match batch size");
  }
  for (int y : labels) {
    if (y < 0 || (max_classes > 0 && y >= max_classes)) {
      throw ConfigError("label out of range");
    }
  }
}
}  // namespace

CenterState CenterState::zeros(int classes, int embed, double update_rate) {
  CenterState cs;
  cs.centers = Matrix(classes, embed);
  cs.update_rate = update_rate;
  return cs;
}

void OsmParams::validate() const {
  if (sigma <= 0.0 || alpha <= 0.0 || balance < 0.0 || balance > 1.0) {
    throw ConfigError("osm params require sigma > 0, alpha > 0, balance in [0,1]");
  }
}

LossRecipe LossRecipe::preset(const std::string& name) {
  LossRecipe r;
  if (name == "baseline-bot") {
    r.w_xent = 1.0; r.w_tri = 1.0; r.w_center = 5e-4; r.w_osm = 0.0; r.w_att = 0.0;
    r.class_vectors = ClassVectorSource::kClassifierWeights;
  } else if (name == "bot-osm") {
    r.w_xent = 1.0; r.w_tri = 0.0; r.w_center = 5e-4; r.w_osm = 1.0; r.w_att = 0.0;
    r.class_vectors = ClassVectorSource::kClassifierWeights;
  } else if (name == "bot-osm-cl") {
    r.w_xent = 1.0; r.w_tri = 0.0; r.w_center = 5e-4; r.w_osm = 1.0; r.w_att = 0.0;
    r.class_vectors = ClassVectorSource::kClCenters;
  } else if (name == "attn-cl") {
    r.w_xent = 1.0; r.w_tri = 0.0; r.w_center = 5e-4; r.w_osm = 1.0; r.w_att = 1.0;
    r.class_vectors = ClassVectorSource::kClCenters;
  } else {
    throw ConfigError("unknown recipe preset: " + name);
  }
  return r;
}

void LossRecipe::validate() const {
  if (w_xent < 0 || w_tri < 0 || w_center < 0 || w_osm < 0 || w_att < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw ConfigError("label smoothing must be in [0, 1)");
  }
  if (margin < 0.0) throw ConfigError("triplet margin must be non-negative");
  osm.validate();
}

const std::vector<std::string>& loss_term_order() {
  static const std::vector<std::string> order = {"xent", "triplet", "center",
                                                 "osm", "attention"};
  return order;
}

TermOutput xent_label_smoothing(const Matrix& logits, const std::vector<int>& labels,
                                double epsilon) {
  if (epsilon < 0.0 || epsilon >= 1.0) {
    throw ConfigError("label smoothing epsilon must be in [0, 1)");
  }
  const int b = logits.rows;
  const int c = logits.cols;
  check_labels(labels, b, c);

  TermOutput out;
  out.d_logits = Matrix(b, c);
  double loss = 0.0;
  const double off = epsilon / c;
  const double on = 1.0 - epsilon + off;
  for (int i = 0; i < b; ++i) {
    const double* z = logits.row(i);
    double mx = z[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(z[j] - mx);
    double log_sum = mx + std::log(sum);
    double row_loss = 0.0;
    for (int j = 0; j < c; ++j) {
      double q = (j == labels[i]) ? on : off;
      double p = std::exp(z[j] - log_sum);
      row_loss += q * (log_sum - z[j]);
      out.d_logits(i, j) = (p - q) / b;
    }
    loss += row_loss;
  }
  out.value = loss / b;
  return out;
}

TermOutput batch_hard_triplet_cosine(const Matrix& features,
                                     const std::vector<int>& labels, double margin) {
  const int b = features.rows;
  check_labels(labels, b, 0);
  bool multi_class = false;
  for (int i = 1; i < b; ++i) multi_class |= (labels[i] != labels[0]);
  if (!multi_class) {
    throw ConfigError("batch_hard_triplet needs at least 2 classes in the batch");
  }

  Matrix dist = kernels::pairwise_distance(features, Metric::kCosine);
  Matrix d_dist(b, b);
  double loss = 0.0;
  for (int a = 0; a < b; ++a) {
    int hardest_pos = -1, hardest_neg = -1;
    double d_pos = -1.0, d_neg = 0.0;
    for (int j = 0; j < b; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (dist(a, j) > d_pos) { d_pos = dist(a, j); hardest_pos = j; }
      } else {
        if (hardest_neg < 0 || dist(a, j) < d_neg) { d_neg = dist(a, j); hardest_neg = j; }
      }
    }
    if (hardest_pos < 0) {
      throw ConfigError("batch_hard_triplet: anchor without a positive sample");
    }
    double hinge = d_pos - d_neg + margin;
    if (hinge > 0.0) {
      loss += hinge;
      d_dist(a, hardest_pos) += 1.0 / b;
      d_dist(a, hardest_neg) -= 1.0 / b;
    }
  }
  TermOutput out;
  out.value = loss / b;
  out.d_features = pairwise_distance_backward(features, Metric::kCosine, d_dist);
  return out;
}

TermOutput center_loss(const Matrix& features, const std::vector<int>& labels,
                       const CenterState& cs) {
  const int b = features.rows;
  const int d = features.cols;
  check_labels(labels, b, cs.centers.rows);
  if (cs.centers.cols != d) throw ConfigError("center dimension mismatch");

  TermOutput out;
  out.d_features = Matrix(b, d);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double* f = features.row(i);
    const double* c = cs.centers.row(labels[i]);
    for (int k = 0; k < d; ++k) {
      double diff = f[k] - c[k];
      loss += diff * diff;
      out.d_features(i, k) = diff / b;
    }
  }
  out.value = loss / (2.0 * b);
  return out;
}

CenterState update_centers(const CenterState& cs, const Matrix& features,
                           const std::vector<int>& labels) {
  const int b = features.rows;
  const int d = features.cols;
  check_labels(labels, b, cs.centers.rows);
  CenterState next = cs;
  for (int y = 0; y < cs.centers.rows; ++y) {
    int count = 0;
    Vec delta(d, 0.0);
    for (int i = 0; i < b; ++i) {
      if (labels[i] != y) continue;
      ++count;
      const double* f = features.row(i);
      for (int k = 0; k < d; ++k) delta[k] += cs.centers(y, k) - f[k];
    }
    if (count == 0) continue;
    for (int k = 0; k < d; ++k) {
      next.centers(y, k) = cs.centers(y, k) - cs.update_rate * delta[k] / (1.0 + count);
    }
  }
  return next;
}

TermOutput osm_caa(const Matrix& features, const std::vector<int>& labels,
                   const Matrix& class_vectors, const OsmParams& params) {
  params.validate();
  const int b = features.rows;
  const int d = features.cols;
  if (b < 2) throw ConfigError("osm_caa needs a batch of at least 2");
  check_labels(labels, b, class_vectors.rows);
  if (class_vectors.cols != d) throw ConfigError("osm class vector dimension mismatch");

  // Normalized features and class vectors; class vectors are constants here.
  std::vector<Vec> unit(b), unit_class(b);
  std::vector<double> raw_att(b), att(b);
  for (int i = 0; i < b; ++i) {
    Vec row(features.row(i), features.row(i) + d);
    unit[i] = l2_normalize(row);
    Vec cv(class_vectors.row(labels[i]), class_vectors.row(labels[i]) + d);
    unit_class[i] = l2_normalize(cv);
    raw_att[i] = dot(unit[i], unit_class[i]);
    att[i] = std::clamp(raw_att[i], 0.0, 1.0);
  }

  const double sigma2 = params.sigma * params.sigma;
  Matrix d2(b, b), dist(b, b), s_pos(b, b), s_neg(b, b);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) {
        double diff = unit[i][k] - unit[j][k];
        acc += diff * diff;
      }
      d2(i, j) = acc;
      dist(i, j) = std::sqrt(std::max(acc, kDistFloor));
      s_pos(i, j) = std::exp(-acc / sigma2);
      s_neg(i, j) = std::max(params.alpha - dist(i, j), 0.0);
    }
  }

  double np = 0.0, dp = 0.0, nn = 0.0, dn = 0.0;
  bool has_pos = false, has_neg = false;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      if (i == j) continue;
      double a_ij = att[i] * att[j];
      if (labels[i] == labels[j]) {
        has_pos = true;
        np += a_ij * s_pos(i, j) * d2(i, j);
        dp += a_ij * s_pos(i, j);
      } else {
        has_neg = true;
        nn += a_ij * s_neg(i, j) * s_neg(i, j);
        dn += a_ij;
      }
    }
  }

  double l_pos = has_pos ? np / std::max(dp, kMaskFloor) : 0.0;
  double l_neg = has_neg ? nn / std::max(dn, kMaskFloor) : 0.0;

  TermOutput out;
  out.value = (1.0 - params.balance) * l_pos + params.balance * l_neg;
  out.d_features = Matrix(b, d);

  // Chain rule back through the two ratios.
  double c_np = 0.0, c_dp = 0.0, c_nn = 0.0, c_dn = 0.0;
  if (has_pos) {
    double denom = std::max(dp, kMaskFloor);
    c_np = (1.0 - params.balance) / denom;
    if (dp > kMaskFloor) c_dp = -(1.0 - params.balance) * np / (denom * denom);
  }
  if (has_neg) {
    double denom = std::max(dn, kMaskFloor);
    c_nn = params.balance / denom;
    if (dn > kMaskFloor) c_dn = -params.balance * nn / (denom * denom);
  }

  std::vector<Vec> g_unit(b, Vec(d, 0.0));
  Vec g_att(b, 0.0);
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < b; ++j) {
      if (i == j) continue;
      double a_ij = att[i] * att[j];
      double g_a = 0.0;
      double g_d2 = 0.0;
      if (labels[i] == labels[j]) {
        g_a = c_np * s_pos(i, j) * d2(i, j) + c_dp * s_pos(i, j);
        double g_spos = c_np * a_ij * d2(i, j) + c_dp * a_ij;
        g_d2 = c_np * a_ij * s_pos(i, j) + g_spos * (-s_pos(i, j) / sigma2);
      } else {
        g_a = c_nn * s_neg(i, j) * s_neg(i, j) + c_dn;
        if (s_neg(i, j) > 0.0 && d2(i, j) > kDistFloor) {
          double g_sneg = c_nn * a_ij * 2.0 * s_neg(i, j);
          g_d2 = g_sneg * (-1.0) / (2.0 * dist(i, j));
        }
      }
      g_att[i] += g_a * att[j];
      g_att[j] += g_a * att[i];
      if (g_d2 != 0.0) {
        for (int k = 0; k < d; ++k) {
          double t = 2.0 * g_d2 * (unit[i][k] - unit[j][k]);
          g_unit[i][k] += t;
          g_unit[j][k] -= t;
        }
      }
    }
  }
  for (int i = 0; i < b; ++i) {
    if (raw_att[i] > 0.0 && raw_att[i] < 1.0) {
      for (int k = 0; k < d; ++k) g_unit[i][k] += g_att[i] * unit_class[i][k];
    }
    Vec row(features.row(i), features.row(i) + d);
    Vec projected = l2_normalize_backward(row, g_unit[i]);
    for (int k = 0; k < d; ++k) out.d_features(i, k) = projected[k];
  }
  return out;
}

TermOutput attention_loss(const Matrix& scores, const std::vector<int>& erase_labels) {
  const int total = scores.rows * scores.cols;
  if (static_cast<int>(erase_labels.size()) != total) {
    throw ConfigError("attention_loss: erase label count does not match scores");
  }
  TermOutput out;
  out.d_scores = Matrix(scores.rows, scores.cols);
  double loss = 0.0;
  for (int i = 0; i < total; ++i) {
    if (erase_labels[i] != 0 && erase_labels[i] != 1) {
      throw ConfigError("attention_loss: erase labels must be 0 or 1");
    }
    if (erase_labels[i] == 1) {
      loss += scores.values[i];
      out.d_scores.values[i] = 1.0 / total;
    }
  }
  out.value = loss / total;
  return out;
}

LossOutput combine(const LossRecipe& recipe,
                   const std::map<std::string, TermOutput>& terms,
                   const GradShapes& shapes) {
  recipe.validate();
  const std::map<std::string, double> weights = {
      {"xent", recipe.w_xent},   {"triplet", recipe.w_tri},
      {"center", recipe.w_center}, {"osm", recipe.w_osm},
      {"attention", recipe.w_att}};

  LossOutput out;
  out.d_logits = Matrix(shapes.batch, shapes.classes);
  out.d_features = Matrix(shapes.batch, shapes.embed);
  out.d_scores = Matrix(shapes.batch, shapes.frames);
  for (const std::string& name : loss_term_order()) {
    double w = weights.at(name);
    if (w == 0.0) continue;
    auto it = terms.find(name);
    if (it == terms.end()) {
      throw ConfigError("combine: enabled loss term missing: " + name);
    }
    const TermOutput& t = it->second;
    out.terms[name] = t.value;
    out.total += w * t.value;
    auto accumulate = [w](Matrix& dst, const Matrix& src, const char* what) {
      if (src.empty()) return;
      if (!same_shape(dst, src)) {
        throw ConfigError(std::string("combine: gradient shape mismatch for ") + what);
      }
      for (std::int64_t i = 0; i < dst.size(); ++i) dst.values[i] += w * src.values[i];
    };
    accumulate(out.d_logits, t.d_logits, "logits");
    accumulate(out.d_features, t.d_features, "features");
    accumulate(out.d_scores, t.d_scores, "scores");
  }
  return out;
}

LossOutput compute_losses(const LossRecipe& recipe, const ForwardCache& cache,
                          const std::vector<int>& labels,
                          const std::vector<int>& erase_labels,
                          const CenterState& centers,
                          const ClassifierParams& classifier) {
  recipe.validate();
  std::map<std::string, TermOutput> terms;
  if (recipe.w_xent > 0.0) {
    terms["xent"] = xent_label_smoothing(cache.logits, labels, recipe.label_smoothing);
  }
  if (recipe.w_tri > 0.0) {
    terms["triplet"] = batch_hard_triplet_cosine(cache.features, labels, recipe.margin);
  }
  if (recipe.w_center > 0.0) {
    terms["center"] = center_loss(cache.features, labels, centers);
  }
  if (recipe.w_osm > 0.0) {
    const Matrix& cv = recipe.class_vectors == ClassVectorSource::kClCenters
                           ? centers.centers
                           : classifier.w;
    terms["osm"] = osm_caa(cache.features, labels, cv, recipe.osm);
  }
  if (recipe.w_att > 0.0) {
    terms["attention"] = attention_loss(cache.att_scores, erase_labels);
  }
  GradShapes shapes{cache.clips, cache.logits.cols, cache.features.cols,
                    cache.frames_per_clip};
  return combine(recipe, terms, shapes);
}

}  // namespace reid
