#include "reid/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "reid/errors.hpp"

namespace reid {

namespace {

// Stream labels under the run's root seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kEpochStream = 2;
constexpr std::uint64_t kGradCheckStream = 3;
constexpr std::uint64_t kCenterInitStream = 4;
constexpr std::uint64_t kHpoStream = 5;
constexpr std::uint64_t kMeasureStream = 6;

int dataset_d_raw(const Dataset& ds) {
  if (ds.tracklets.empty() || ds.tracklets[0].frames.empty()) {
    throw ConfigError("dataset has no frames");
  }
  const Frame& first = ds.tracklets[0].frames[0];
  int d_raw = first.h * first.w;
  for (const Tracklet& tr : ds.tracklets) {
    for (const Frame& f : tr.frames) {
      if (f.h != first.h || f.w != first.w) {
        throw ConfigError("all tracklets must share the frame grid shape");
      }
    }
  }
  return d_raw;
}

EraseParams resolve_erase(const TrainConfig& config, const Dataset& ds) {
  EraseParams e = config.erase;
  e.fill = config.erase_fill ? *config.erase_fill : ds.train_mean();
  return e;
}

}  // namespace

void TrainConfig::validate() const {
  recipe.validate();
  schedule.validate();
  erase.validate();
  if (p < 1 || k < 1 || n_frames < 1 || epochs < 0 || steps_per_epoch < 1) {
    throw ConfigError("train counts must be positive (epochs may be 0)");
  }
  if (p * k < 2) throw ConfigError("P*K must be at least 2 for batch norm");
  if (recipe.w_tri > 0.0 && k < 2) {
    throw ConfigError("triplet loss needs K >= 2 clips per identity");
  }
  if (recipe.w_tri > 0.0 && p < 2) {
    throw ConfigError("triplet loss needs P >= 2 identities per batch");
  }
  if (hidden < 1 || embed < 1) throw ConfigError("model dims must be positive");
  if (center_update_rate < 0.0) {
    throw ConfigError("center update rate must be non-negative");
  }
}

std::uint64_t config_digest(const TrainConfig& config) {
  std::ostringstream ss;
  ss << config.recipe_name << '|' << config.recipe.w_xent << '|'
     << config.recipe.w_tri << '|' << config.recipe.w_center << '|'
     << config.recipe.w_osm << '|' << config.recipe.w_att << '|'
     << config.recipe.label_smoothing << '|' << config.recipe.margin << '|'
     << config.recipe.osm.sigma << '|' << config.recipe.osm.alpha << '|'
     << config.recipe.osm.balance << '|'
     << (config.recipe.class_vectors == ClassVectorSource::kClCenters) << '|'
     << config.p << '|' << config.k << '|' << config.n_frames << '|'
     << config.epochs << '|' << config.steps_per_epoch << '|'
     << config.schedule.base_lr << '|' << config.schedule.warmup_epochs << '|'
     << config.schedule.decay_factor << '|';
  for (int e : config.schedule.decay_epochs) ss << e << ',';
  ss << '|' << static_cast<int>(config.optimizer.kind) << '|'
     << config.optimizer.beta1 << '|' << config.optimizer.beta2 << '|'
     << config.optimizer.eps << '|' << config.optimizer.momentum << '|'
     << config.erase.probability << '|' << config.erase.area_lo << '|'
     << config.erase.area_hi << '|' << config.erase.aspect_lo << '|'
     << config.erase.aspect_hi << '|' << config.erase.force_one_erase << '|'
     << (config.erase_fill ? *config.erase_fill : -0.0) << '|' << config.hidden
     << '|' << config.embed << '|' << config.center_update_rate << '|'
     << config.seed;
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : ss.str()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

std::map<int, int> class_index_of(const Dataset& ds) {
  std::map<int, int> out;
  for (int pid : ds.train_ids()) {
    int next = static_cast<int>(out.size());
    out[pid] = next;
  }
  return out;
}

std::vector<int> clip_class_labels(const ClipBatch& batch,
                                   const std::map<int, int>& class_of_pid) {
  std::vector<int> labels;
  labels.reserve(batch.clips.size());
  for (const Clip& c : batch.clips) {
    auto it = class_of_pid.find(c.person_id);
    if (it == class_of_pid.end()) {
      throw ConfigError("batch clip has a person id outside the train roster");
    }
    labels.push_back(it->second);
  }
  return labels;
}

StepMetrics train_step(ModelParams& model, CenterState& centers,
                       OptimizerState& opt, const ClipBatch& batch,
                       const std::vector<int>& labels, const LossRecipe& recipe,
                       const OptimizerConfig& opt_config, double lr) {
  ForwardCache cache = forward(model, batch, Mode::kTrain);

  std::vector<int> erase_labels;
  erase_labels.reserve(batch.clips.size() * batch.n);
  for (const Clip& c : batch.clips) {
    erase_labels.insert(erase_labels.end(), c.erase_labels.begin(),
                        c.erase_labels.end());
  }

  LossOutput losses = compute_losses(recipe, cache, labels, erase_labels,
                                     centers, model.cls);
  ParamGrads grads = backward(model, cache, losses.d_logits, losses.d_features,
                              losses.d_scores);
  optimizer_step(model, grads, opt, opt_config, lr);
  model.bn.running_mean = cache.bn.new_running_mean;
  model.bn.running_var = cache.bn.new_running_var;
  centers = update_centers(centers, cache.features, labels);

  StepMetrics metrics;
  metrics.terms = losses.terms;
  metrics.total = losses.total;
  for (std::size_t i = 0; i < erase_labels.size(); ++i) {
    if (erase_labels[i] == 1) {
      metrics.erased_score_sum += cache.att_scores.values[i];
      metrics.erased_frames += 1;
    }
  }
  return metrics;
}

FitResult fit(const TrainConfig& config, const Dataset& ds, const Checkpoint* init,
              const EpochCallback& callback) {
  config.validate();
  const int d_raw = dataset_d_raw(ds);
  std::map<int, int> class_map = class_index_of(ds);
  const int classes = static_cast<int>(class_map.size());
  if (classes < 2) throw ConfigError("fit: need at least 2 train identities");
  if (classes < config.p) {
    throw ConfigError("fit: fewer train identities than P");
  }
  ModelDims dims{d_raw, config.hidden, config.embed, classes};
  EraseParams erase = resolve_erase(config, ds);

  RandomStream root(config.seed);
  FitResult result;
  ModelParams model;
  CenterState centers;
  OptimizerState opt;
  int start_epoch = 0;

  if (init != nullptr) {
    if (init->model.dims.d_raw != dims.d_raw || init->model.dims.hidden != dims.hidden ||
        init->model.dims.embed != dims.embed || init->model.dims.classes != dims.classes) {
      throw ConfigError("fit: checkpoint dimensions do not match this run");
    }
    model = init->model;
    centers = init->centers;
    centers.update_rate = config.center_update_rate;
    opt = init->opt;
    start_epoch = init->epoch;
  } else {
    RandomStream init_rng = root.split(kInitStream);
    model = ModelParams::init(dims, init_rng);
    centers = CenterState::zeros(classes, config.embed, config.center_update_rate);
    opt = OptimizerState::zeros_like(model);
  }

  for (int epoch = start_epoch + 1; epoch <= config.epochs; ++epoch) {
    double lr = lr_at_epoch(config.schedule, epoch);
    RandomStream epoch_stream = root.split(kEpochStream).split(epoch);

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    double erased_sum = 0.0;
    int erased_count = 0;
    for (int step = 1; step <= config.steps_per_epoch; ++step) {
      RandomStream step_stream = epoch_stream.split(step);
      ClipBatch batch = pk_sample_batch(ds, config.p, config.k, config.n_frames,
                                        erase, step_stream);
      std::vector<int> labels = clip_class_labels(batch, class_map);
      StepMetrics metrics = train_step(model, centers, opt, batch, labels,
                                       config.recipe, config.optimizer, lr);
      for (const auto& [name, value] : metrics.terms) {
        log.mean_terms[name] += value / config.steps_per_epoch;
      }
      log.mean_total += metrics.total / config.steps_per_epoch;
      erased_sum += metrics.erased_score_sum;
      erased_count += metrics.erased_frames;
    }
    log.erased_attention = erased_count > 0 ? erased_sum / erased_count : -1.0;
    result.log.push_back(log);

    for (const TensorRef& t : param_tensors(model)) {
      for (std::size_t i = 0; i < t.size; ++i) {
        if (!std::isfinite(t.data[i])) {
          throw NumericError("training diverged: non-finite value in " + t.name);
        }
      }
    }
    if (callback && callback(epoch, model, centers)) {
      result.checkpoint = {model, centers, opt, config_digest(config), epoch};
      return result;
    }
  }

  result.checkpoint = {model, centers, opt, config_digest(config),
                       std::max(start_epoch, config.epochs)};
  return result;
}

GradCheckReport grad_check(const TrainConfig& config, const Dataset& ds,
                           std::uint64_t seed, double tol) {
  TrainConfig cfg = config;
  cfg.seed = seed;
  cfg.validate();
  const int d_raw = dataset_d_raw(ds);
  std::map<int, int> class_map = class_index_of(ds);
  const int classes = static_cast<int>(class_map.size());
  ModelDims dims{d_raw, cfg.hidden, cfg.embed, classes};

  RandomStream root(seed);
  RandomStream init_rng = root.split(kInitStream);
  ModelParams model = ModelParams::init(dims, init_rng);

  // Non-trivial centers so the CL-Centers paths carry real gradients.
  CenterState centers = CenterState::zeros(classes, cfg.embed, cfg.center_update_rate);
  RandomStream center_rng = root.split(kCenterInitStream);
  for (double& v : centers.centers.values) v = 0.5 * center_rng.next_normal();

  EraseParams erase = resolve_erase(cfg, ds);
  RandomStream batch_rng = root.split(kGradCheckStream);
  ClipBatch batch = pk_sample_batch(ds, cfg.p, cfg.k, cfg.n_frames, erase, batch_rng);
  std::vector<int> labels = clip_class_labels(batch, class_map);
  std::vector<int> erase_labels;
  for (const Clip& c : batch.clips) {
    erase_labels.insert(erase_labels.end(), c.erase_labels.begin(),
                        c.erase_labels.end());
  }

  auto total_loss = [&]() {
    ForwardCache cache = forward(model, batch, Mode::kTrain);
    return compute_losses(cfg.recipe, cache, labels, erase_labels, centers,
                          model.cls)
        .total;
  };

  ForwardCache cache = forward(model, batch, Mode::kTrain);
  LossOutput losses = compute_losses(cfg.recipe, cache, labels, erase_labels,
                                     centers, model.cls);
  ParamGrads grads = backward(model, cache, losses.d_logits, losses.d_features,
                              losses.d_scores);

  const double h = 1e-5;
  GradCheckReport report;
  report.tol = tol;
  report.pass = true;
  std::vector<TensorRef> params = param_tensors(model);
  std::vector<TensorRef> grad_refs = grad_tensors(grads);
  for (std::size_t t = 0; t < params.size(); ++t) {
    GradCheckEntry entry;
    entry.tensor = params[t].name;
    for (std::size_t i = 0; i < params[t].size; ++i) {
      double saved = params[t].data[i];
      params[t].data[i] = saved + h;
      double up = total_loss();
      params[t].data[i] = saved - h;
      double down = total_loss();
      params[t].data[i] = saved;
      double numeric = (up - down) / (2.0 * h);
      double analytic = grad_refs[t].data[i];
      double rel = std::abs(analytic - numeric) /
                   std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.pass = report.pass && entry.max_rel_err < tol;
    report.entries.push_back(entry);
  }
  return report;
}

double measure_erased_attention(const ModelParams& model, const Dataset& ds,
                                const TrainConfig& config, std::uint64_t seed,
                                int num_batches) {
  EraseParams erase = resolve_erase(config, ds);
  RandomStream root = RandomStream(seed).split(kMeasureStream);
  double sum = 0.0;
  int count = 0;
  for (int b = 1; b <= num_batches; ++b) {
    RandomStream rng = root.split(b);
    ClipBatch batch = pk_sample_batch(ds, config.p, config.k, config.n_frames,
                                      erase, rng);
    ForwardCache cache = forward(model, batch, Mode::kInfer);
    int idx = 0;
    for (const Clip& c : batch.clips) {
      for (int label : c.erase_labels) {
        if (label == 1) {
          sum += cache.att_scores.values[idx];
          ++count;
        }
        ++idx;
      }
    }
  }
  if (count == 0) throw ConfigError("measure_erased_attention: no erased frames");
  return sum / count;
}

HpoSpace HpoSpace::defaults() {
  HpoSpace space;
  space.ranges["base_lr"] = {1e-4, 2e-3, true};
  space.ranges["sigma"] = {0.3, 1.5, false};
  space.ranges["alpha"] = {0.6, 2.0, false};
  space.ranges["balance"] = {0.2, 0.8, false};
  space.ranges["margin"] = {0.1, 0.6, false};
  space.ranges["label_smoothing"] = {0.0, 0.3, false};
  space.ranges["w_att"] = {0.1, 2.0, false};
  return space;
}

TrainConfig apply_hpo_param(TrainConfig config, const std::string& name,
                            double value) {
  if (name == "base_lr") {
    config.schedule.base_lr = value;
  } else if (name == "sigma") {
    config.recipe.osm.sigma = value;
  } else if (name == "alpha") {
    config.recipe.osm.alpha = value;
  } else if (name == "balance") {
    config.recipe.osm.balance = value;
  } else if (name == "margin") {
    config.recipe.margin = value;
  } else if (name == "label_smoothing") {
    config.recipe.label_smoothing = value;
  } else if (name == "w_att") {
    config.recipe.w_att = value;
  } else {
    throw ConfigError("unknown hyperparameter: " + name);
  }
  return config;
}

std::vector<HpoTrial> random_search(const HpoSpace& space, int budget,
                                    const TrainConfig& base, const Dataset& ds,
                                    const EvalConfig& eval_config,
                                    std::uint64_t seed) {
  if (budget < 1) throw ConfigError("random_search: budget must be at least 1");
  if (space.ranges.empty()) throw ConfigError("random_search: empty search space");
  for (const auto& [name, range] : space.ranges) {
    if (!(range.lo <= range.hi)) {
      throw ConfigError("random_search: invalid range for " + name);
    }
    if (range.log_scale && range.lo <= 0.0) {
      throw ConfigError("random_search: log range needs positive bounds for " + name);
    }
  }

  RandomStream root = RandomStream(seed).split(kHpoStream);
  std::vector<HpoTrial> trials;
  for (int i = 0; i < budget; ++i) {
    RandomStream rng = root.split(i);
    TrainConfig config = base;
    for (const auto& [name, range] : space.ranges) {
      double value;
      if (range.log_scale) {
        value = std::exp(rng.next_uniform(std::log(range.lo), std::log(range.hi)));
      } else {
        value = rng.next_uniform(range.lo, range.hi);
      }
      config = apply_hpo_param(std::move(config), name, value);
    }
    FitResult fitted = fit(config, ds);
    EvalConfig ec = eval_config;
    ec.rerank = false;  // plain mAP ranks the trials
    EvalResult eval = evaluate(fitted.checkpoint.model, ds, ec);
    HpoTrial trial;
    trial.index = i;
    trial.config = config;
    trial.map = eval.plain.map;
    trial.scores = eval.plain;
    trials.push_back(std::move(trial));
  }
  std::stable_sort(trials.begin(), trials.end(), [](const HpoTrial& a, const HpoTrial& b) {
    if (a.map != b.map) return a.map > b.map;
    return a.index < b.index;
  });
  return trials;
}

}  // namespace reid
