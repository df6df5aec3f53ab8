#pragma once

#include <map>
#include <string>
#include <vector>

#include "reid/matrix.hpp"
#include "reid/model.hpp"

namespace reid {

// One center vector per train identity; consumed by center loss and, in the
// CL-Centers variant, as the class vectors inside OSM/CAA. Centers evolve
// only through update_centers and are constants within a step.
struct CenterState {
  Matrix centers;  // classes × embed
  double update_rate = 0.5;

  static CenterState zeros(int classes, int embed, double update_rate);
};

struct OsmParams {
  double sigma = 0.8;    // positive-pair bandwidth
  double alpha = 1.2;    // negative hinge margin
  double balance = 0.5;  // positive/negative mix in [0, 1]

  void validate() const;
};

enum class ClassVectorSource { kClassifierWeights, kClCenters };

struct LossRecipe {
  double w_xent = 1.0;
  double w_tri = 1.0;
  double w_center = 5e-4;
  double w_osm = 0.0;
  double w_att = 0.0;
  double label_smoothing = 0.1;
  double margin = 0.3;
  OsmParams osm;
  ClassVectorSource class_vectors = ClassVectorSource::kClassifierWeights;

  // "baseline-bot", "bot-osm", "bot-osm-cl", "attn-cl".
  static LossRecipe preset(const std::string& name);
  void validate() const;
};

// A single loss term: scalar value plus gradients for whichever tensors the
// term consumes (unused slots stay empty).
struct TermOutput {
  double value = 0.0;
  Matrix d_logits;    // B × classes
  Matrix d_features;  // B × embed (pre-BN)
  Matrix d_scores;    // B × N attention weights
};

struct LossOutput {
  double total = 0.0;
  std::map<std::string, double> terms;
  Matrix d_logits;
  Matrix d_features;
  Matrix d_scores;
};

// Canonical accumulation order for the combined total.
const std::vector<std::string>& loss_term_order();

TermOutput xent_label_smoothing(const Matrix& logits, const std::vector<int>& labels,
                                double epsilon);

// Batch-hard mining on the cosine distance matrix: per anchor the farthest
// same-label and nearest different-label sample, hinged at the margin.
TermOutput batch_hard_triplet_cosine(const Matrix& features,
                                     const std::vector<int>& labels, double margin);

TermOutput center_loss(const Matrix& features, const std::vector<int>& labels,
                       const CenterState& cs);

CenterState update_centers(const CenterState& cs, const Matrix& features,
                           const std::vector<int>& labels);

// Online soft mining with class-aware attention. Positive pairs are weighted
// by exp(-d²/σ²) and pulled by d², negatives by a squared hinge at α; both
// sides are scaled by the pair attention a_i·a_j where a_i is the clamped
// similarity of sample i to its class vector.
TermOutput osm_caa(const Matrix& features, const std::vector<int>& labels,
                   const Matrix& class_vectors, const OsmParams& params);

// Mean attention score over frames whose erase label is 1, averaged across
// every frame in the batch; erase_labels is row-major B*N.
TermOutput attention_loss(const Matrix& scores, const std::vector<int>& erase_labels);

struct GradShapes {
  int batch = 0;
  int classes = 0;
  int embed = 0;
  int frames = 0;
};

// Weighted sum of the enabled terms; throws if a term with positive weight
// is missing. Gradient slots are always emitted at full shape.
LossOutput combine(const LossRecipe& recipe,
                   const std::map<std::string, TermOutput>& terms,
                   const GradShapes& shapes);

// Evaluates every enabled term for one forward pass and combines them.
LossOutput compute_losses(const LossRecipe& recipe, const ForwardCache& cache,
                          const std::vector<int>& labels,
                          const std::vector<int>& erase_labels,
                          const CenterState& centers,
                          const ClassifierParams& classifier);

}  // namespace reid
