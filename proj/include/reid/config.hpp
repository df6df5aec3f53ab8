#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "reid/dataset.hpp"
#include "reid/evalkit.hpp"
#include "reid/trainer.hpp"

namespace reid {

struct RerankConfig {
  bool enabled = true;
  int k1 = 20;
  int k2 = 6;
  double lambda = 0.3;
};

struct HpoConfig {
  int budget = 8;
  HpoSpace space = HpoSpace::defaults();
};

struct GradCheckConfig {
  double tol = 1e-4;
};

// One JSON document drives every subcommand. The top-level seed is mandatory
// and feeds all internal streams; unknown keys anywhere are rejected;
// missing fields take the documented defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  SynthSpec synth;
  TrainConfig train;
  EvalConfig eval;
  RerankConfig rerank;
  HpoConfig hpo;
  GradCheckConfig gradcheck;
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

// Fully-resolved config (defaults and presets expanded) for reproducibility;
// parsing the echo yields the same RunConfig.
nlohmann::json run_config_to_json(const RunConfig& config);

nlohmann::json scores_to_json(const Scores& scores, const std::vector<int>& ranks);
nlohmann::json eval_result_to_json(const EvalResult& result,
                                   const std::vector<int>& ranks);

}  // namespace reid
