#include "reid/config.hpp"

#include <fstream>
#include <set>

#include "reid/errors.hpp"

namespace reid {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(path + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key: " + path + "." + key);
    }
  }
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field has the wrong type: " + key);
  }
}

void parse_synth(const json& obj, SynthSpec& spec) {
  check_keys(obj, "synth",
             {"identities", "tracklets_per_id", "frames_per_tracklet", "height",
              "width", "cameras", "intra_noise", "inter_separation"});
  spec.identities = get_or(obj, "identities", spec.identities);
  spec.tracklets_per_id = get_or(obj, "tracklets_per_id", spec.tracklets_per_id);
  spec.frames_per_tracklet =
      get_or(obj, "frames_per_tracklet", spec.frames_per_tracklet);
  spec.height = get_or(obj, "height", spec.height);
  spec.width = get_or(obj, "width", spec.width);
  spec.cameras = get_or(obj, "cameras", spec.cameras);
  spec.intra_noise = get_or(obj, "intra_noise", spec.intra_noise);
  spec.inter_separation = get_or(obj, "inter_separation", spec.inter_separation);
}

void parse_train(const json& obj, TrainConfig& train) {
  check_keys(obj, "train",
             {"recipe", "weights", "class_vectors", "label_smoothing",
              "triplet_margin", "osm", "p", "k", "n_frames", "epochs",
              "steps_per_epoch", "schedule", "optimizer", "erase", "hidden_dim",
              "embed_dim", "center_update_rate"});
  train.recipe_name = get_or<std::string>(obj, "recipe", train.recipe_name);
  train.recipe = LossRecipe::preset(train.recipe_name);
  if (obj.contains("weights")) {
    const json& w = obj.at("weights");
    check_keys(w, "train.weights", {"xent", "triplet", "center", "osm", "attention"});
    train.recipe.w_xent = get_or(w, "xent", train.recipe.w_xent);
    train.recipe.w_tri = get_or(w, "triplet", train.recipe.w_tri);
    train.recipe.w_center = get_or(w, "center", train.recipe.w_center);
    train.recipe.w_osm = get_or(w, "osm", train.recipe.w_osm);
    train.recipe.w_att = get_or(w, "attention", train.recipe.w_att);
  }
  if (obj.contains("class_vectors")) {
    std::string source = obj.at("class_vectors").get<std::string>();
    if (source == "classifier_weights") {
      train.recipe.class_vectors = ClassVectorSource::kClassifierWeights;
    } else if (source == "cl_centers") {
      train.recipe.class_vectors = ClassVectorSource::kClCenters;
    } else {
      throw ConfigError("class_vectors must be classifier_weights or cl_centers");
    }
  }
  train.recipe.label_smoothing =
      get_or(obj, "label_smoothing", train.recipe.label_smoothing);
  train.recipe.margin = get_or(obj, "triplet_margin", train.recipe.margin);
  if (obj.contains("osm")) {
    const json& o = obj.at("osm");
    check_keys(o, "train.osm", {"sigma", "alpha", "balance"});
    train.recipe.osm.sigma = get_or(o, "sigma", train.recipe.osm.sigma);
    train.recipe.osm.alpha = get_or(o, "alpha", train.recipe.osm.alpha);
    train.recipe.osm.balance = get_or(o, "balance", train.recipe.osm.balance);
  }
  train.p = get_or(obj, "p", train.p);
  train.k = get_or(obj, "k", train.k);
  train.n_frames = get_or(obj, "n_frames", train.n_frames);
  train.epochs = get_or(obj, "epochs", train.epochs);
  train.steps_per_epoch = get_or(obj, "steps_per_epoch", train.steps_per_epoch);
  if (obj.contains("schedule")) {
    const json& s = obj.at("schedule");
    check_keys(s, "train.schedule",
               {"base_lr", "warmup_epochs", "decay_epochs", "decay_factor"});
    train.schedule.base_lr = get_or(s, "base_lr", train.schedule.base_lr);
    train.schedule.warmup_epochs =
        get_or(s, "warmup_epochs", train.schedule.warmup_epochs);
    train.schedule.decay_epochs =
        get_or(s, "decay_epochs", train.schedule.decay_epochs);
    train.schedule.decay_factor =
        get_or(s, "decay_factor", train.schedule.decay_factor);
  }
  if (obj.contains("optimizer")) {
    const json& o = obj.at("optimizer");
    check_keys(o, "train.optimizer", {"kind", "beta1", "beta2", "eps", "momentum"});
    std::string kind = get_or<std::string>(o, "kind", "adam");
    if (kind == "adam") {
      train.optimizer.kind = OptimizerKind::kAdam;
    } else if (kind == "momentum") {
      train.optimizer.kind = OptimizerKind::kMomentum;
    } else {
      throw ConfigError("optimizer kind must be adam or momentum");
    }
    train.optimizer.beta1 = get_or(o, "beta1", train.optimizer.beta1);
    train.optimizer.beta2 = get_or(o, "beta2", train.optimizer.beta2);
    train.optimizer.eps = get_or(o, "eps", train.optimizer.eps);
    train.optimizer.momentum = get_or(o, "momentum", train.optimizer.momentum);
  }
  if (obj.contains("erase")) {
    const json& e = obj.at("erase");
    check_keys(e, "train.erase",
               {"probability", "area", "aspect", "fill", "force_one_erase"});
    train.erase.probability = get_or(e, "probability", train.erase.probability);
    if (e.contains("area")) {
      std::vector<double> area = e.at("area").get<std::vector<double>>();
      if (area.size() != 2) throw ConfigError("erase.area must be [lo, hi]");
      train.erase.area_lo = area[0];
      train.erase.area_hi = area[1];
    }
    if (e.contains("aspect")) {
      std::vector<double> aspect = e.at("aspect").get<std::vector<double>>();
      if (aspect.size() != 2) throw ConfigError("erase.aspect must be [lo, hi]");
      train.erase.aspect_lo = aspect[0];
      train.erase.aspect_hi = aspect[1];
    }
    if (e.contains("fill") && !e.at("fill").is_null()) {
      train.erase_fill = e.at("fill").get<double>();
    }
    train.erase.force_one_erase =
        get_or(e, "force_one_erase", train.erase.force_one_erase);
  }
  train.hidden = get_or(obj, "hidden_dim", train.hidden);
  train.embed = get_or(obj, "embed_dim", train.embed);
  train.center_update_rate =
      get_or(obj, "center_update_rate", train.center_update_rate);
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  check_keys(doc, "config",
             {"seed", "synth", "train", "eval", "rerank", "hpo", "gradcheck"});
  if (!doc.contains("seed")) throw ConfigError("config requires a top-level seed");
  RunConfig config;
  config.seed = doc.at("seed").get<std::uint64_t>();
  if (doc.contains("synth")) parse_synth(doc.at("synth"), config.synth);
  if (doc.contains("train")) parse_train(doc.at("train"), config.train);
  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    check_keys(e, "eval", {"n_frames", "ranks"});
    config.eval.n_frames = get_or(e, "n_frames", config.eval.n_frames);
    config.eval.ranks = get_or(e, "ranks", config.eval.ranks);
    for (int r : config.eval.ranks) {
      if (r < 1) throw ConfigError("eval.ranks must be positive");
    }
  }
  if (doc.contains("rerank")) {
    const json& r = doc.at("rerank");
    check_keys(r, "rerank", {"enabled", "k1", "k2", "lambda"});
    config.rerank.enabled = get_or(r, "enabled", config.rerank.enabled);
    config.rerank.k1 = get_or(r, "k1", config.rerank.k1);
    config.rerank.k2 = get_or(r, "k2", config.rerank.k2);
    config.rerank.lambda = get_or(r, "lambda", config.rerank.lambda);
  }
  if (doc.contains("hpo")) {
    const json& h = doc.at("hpo");
    check_keys(h, "hpo", {"budget", "space"});
    config.hpo.budget = get_or(h, "budget", config.hpo.budget);
    if (h.contains("space")) {
      config.hpo.space.ranges.clear();
      const json& space = h.at("space");
      if (!space.is_object()) throw ConfigError("hpo.space must be an object");
      for (const auto& [name, range] : space.items()) {
        check_keys(range, "hpo.space." + name, {"min", "max", "log"});
        if (!range.contains("min") || !range.contains("max")) {
          throw ConfigError("hpo.space." + name + " needs min and max");
        }
        HpoRange r;
        r.lo = range.at("min").get<double>();
        r.hi = range.at("max").get<double>();
        r.log_scale = get_or(range, "log", false);
        config.hpo.space.ranges[name] = r;
      }
    }
  }
  if (doc.contains("gradcheck")) {
    const json& g = doc.at("gradcheck");
    check_keys(g, "gradcheck", {"tol"});
    config.gradcheck.tol = get_or(g, "tol", config.gradcheck.tol);
  }

  // The top-level seed feeds every stream.
  config.train.seed = config.seed;
  config.eval.seed = config.seed;
  config.eval.rerank = config.rerank.enabled;
  config.eval.k1 = config.rerank.k1;
  config.eval.k2 = config.rerank.k2;
  config.eval.lambda = config.rerank.lambda;
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoError::Code::kOpenFailed, "cannot open config: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_run_config(doc);
}

json run_config_to_json(const RunConfig& config) {
  json doc;
  doc["seed"] = config.seed;
  doc["synth"] = {{"identities", config.synth.identities},
                  {"tracklets_per_id", config.synth.tracklets_per_id},
                  {"frames_per_tracklet", config.synth.frames_per_tracklet},
                  {"height", config.synth.height},
                  {"width", config.synth.width},
                  {"cameras", config.synth.cameras},
                  {"intra_noise", config.synth.intra_noise},
                  {"inter_separation", config.synth.inter_separation}};
  const TrainConfig& t = config.train;
  json train;
  train["recipe"] = t.recipe_name;
  train["weights"] = {{"xent", t.recipe.w_xent},
                      {"triplet", t.recipe.w_tri},
                      {"center", t.recipe.w_center},
                      {"osm", t.recipe.w_osm},
                      {"attention", t.recipe.w_att}};
  train["class_vectors"] =
      t.recipe.class_vectors == ClassVectorSource::kClCenters ? "cl_centers"
                                                              : "classifier_weights";
  train["label_smoothing"] = t.recipe.label_smoothing;
  train["triplet_margin"] = t.recipe.margin;
  train["osm"] = {{"sigma", t.recipe.osm.sigma},
                  {"alpha", t.recipe.osm.alpha},
                  {"balance", t.recipe.osm.balance}};
  train["p"] = t.p;
  train["k"] = t.k;
  train["n_frames"] = t.n_frames;
  train["epochs"] = t.epochs;
  train["steps_per_epoch"] = t.steps_per_epoch;
  train["schedule"] = {{"base_lr", t.schedule.base_lr},
                       {"warmup_epochs", t.schedule.warmup_epochs},
                       {"decay_epochs", t.schedule.decay_epochs},
                       {"decay_factor", t.schedule.decay_factor}};
  train["optimizer"] = {
      {"kind", t.optimizer.kind == OptimizerKind::kAdam ? "adam" : "momentum"},
      {"beta1", t.optimizer.beta1},
      {"beta2", t.optimizer.beta2},
      {"eps", t.optimizer.eps},
      {"momentum", t.optimizer.momentum}};
  json erase;
  erase["probability"] = t.erase.probability;
  erase["area"] = {t.erase.area_lo, t.erase.area_hi};
  erase["aspect"] = {t.erase.aspect_lo, t.erase.aspect_hi};
  if (t.erase_fill) {
    erase["fill"] = *t.erase_fill;
  } else {
    erase["fill"] = nullptr;
  }
  erase["force_one_erase"] = t.erase.force_one_erase;
  train["erase"] = erase;
  train["hidden_dim"] = t.hidden;
  train["embed_dim"] = t.embed;
  train["center_update_rate"] = t.center_update_rate;
  doc["train"] = train;
  doc["eval"] = {{"n_frames", config.eval.n_frames}, {"ranks", config.eval.ranks}};
  doc["rerank"] = {{"enabled", config.rerank.enabled},
                   {"k1", config.rerank.k1},
                   {"k2", config.rerank.k2},
                   {"lambda", config.rerank.lambda}};
  json space = json::object();
  for (const auto& [name, range] : config.hpo.space.ranges) {
    space[name] = {{"min", range.lo}, {"max", range.hi}, {"log", range.log_scale}};
  }
  doc["hpo"] = {{"budget", config.hpo.budget}, {"space", space}};
  doc["gradcheck"] = {{"tol", config.gradcheck.tol}};
  return doc;
}

json scores_to_json(const Scores& scores, const std::vector<int>& ranks) {
  json cmc = json::object();
  for (int r : ranks) cmc[std::to_string(r)] = scores.cmc_at(r);
  return {{"mAP", scores.map},
          {"cmc", cmc},
          {"num_valid_queries", scores.num_valid_queries}};
}

json eval_result_to_json(const EvalResult& result, const std::vector<int>& ranks) {
  json doc = scores_to_json(result.plain, ranks);
  if (result.reranked) {
    doc["reranked"] = scores_to_json(*result.reranked, ranks);
  }
  return doc;
}

}  // namespace reid
