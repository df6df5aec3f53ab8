#include "reid/cli.hpp"

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "reid/checkpoint.hpp"
#include "reid/config.hpp"
#include "reid/errors.hpp"
#include "reid/tracklet_io.hpp"

namespace reid {

namespace {

using nlohmann::json;

json epoch_log_to_json(const EpochLog& log) {
  json doc;
  doc["epoch"] = log.epoch;
  doc["lr"] = log.lr;
  json terms = json::object();
  for (const auto& [name, value] : log.mean_terms) terms[name] = value;
  doc["terms"] = terms;
  doc["total"] = log.mean_total;
  if (log.erased_attention >= 0.0) {
    doc["erased_attention"] = log.erased_attention;
  } else {
    doc["erased_attention"] = nullptr;
  }
  return doc;
}

int cmd_synth(const RunConfig& config, const std::string& out_path) {
  Dataset ds = generate_synthetic(config.synth, config.seed);
  write_tracklets(ds, out_path);
  json doc;
  doc["resolved_config"] = run_config_to_json(config);
  doc["path"] = out_path;
  doc["tracklets"] = ds.tracklets.size();
  doc["train_identities"] = ds.train_ids().size();
  doc["train_tracklets"] = ds.indices_of(Split::kTrain).size();
  doc["query_tracklets"] = ds.indices_of(Split::kTestQuery).size();
  doc["gallery_tracklets"] = ds.indices_of(Split::kTestGallery).size();
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_train(const RunConfig& config, const std::string& data_path,
              const std::string& out_path, const std::string& init_path) {
  Dataset ds = read_tracklets(data_path);
  Checkpoint init;
  bool has_init = !init_path.empty();
  if (has_init) init = load_checkpoint(init_path);
  FitResult result = fit(config.train, ds, has_init ? &init : nullptr);
  save_checkpoint(result.checkpoint, out_path);

  std::string log_path = out_path + ".log.jsonl";
  std::ofstream log_out(log_path, std::ios::trunc);
  if (!log_out) {
    throw IoError(IoError::Code::kOpenFailed, "cannot open for writing: " + log_path);
  }
  for (const EpochLog& log : result.log) {
    log_out << epoch_log_to_json(log).dump() << "\n";
  }
  if (!log_out) throw IoError(IoError::Code::kWriteFailed, "write failed: " + log_path);

  json doc;
  doc["resolved_config"] = run_config_to_json(config);
  doc["checkpoint"] = out_path;
  doc["log"] = log_path;
  doc["epochs_completed"] = result.checkpoint.epoch;
  if (!result.log.empty()) {
    doc["final"] = epoch_log_to_json(result.log.back());
  }
  std::cout << doc.dump(2) << "\n";
  return 0;
}

int cmd_eval(const RunConfig& config, const std::string& data_path,
             const std::string& checkpoint_path, const std::string& out_path) {
  Dataset ds = read_tracklets(data_path);
  Checkpoint cp = load_checkpoint(checkpoint_path);
  EvalResult result = evaluate(cp.model, ds, config.eval);
  json doc = eval_result_to_json(result, config.eval.ranks);
  doc["resolved_config"] = run_config_to_json(config);
  std::cout << doc.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      throw IoError(IoError::Code::kOpenFailed, "cannot open for writing: " + out_path);
    }
    out << doc.dump(2) << "\n";
  }
  return 0;
}

int cmd_gradcheck(const RunConfig& config) {
  Dataset ds = generate_synthetic(config.synth, config.seed);
  GradCheckReport report = grad_check(config.train, ds, config.seed,
                                      config.gradcheck.tol);
  json doc;
  doc["resolved_config"] = run_config_to_json(config);
  doc["tol"] = report.tol;
  doc["pass"] = report.pass;
  json tensors = json::object();
  for (const GradCheckEntry& e : report.entries) tensors[e.tensor] = e.max_rel_err;
  doc["max_rel_err"] = tensors;
  std::cout << doc.dump(2) << "\n";
  return report.pass ? 0 : 4;
}

int cmd_hpo(const RunConfig& config, const std::string& data_path,
            const std::string& out_path) {
  Dataset ds = read_tracklets(data_path);
  std::vector<HpoTrial> trials = random_search(config.hpo.space, config.hpo.budget,
                                               config.train, ds, config.eval,
                                               config.seed);
  json doc;
  doc["resolved_config"] = run_config_to_json(config);
  json list = json::array();
  for (std::size_t rank = 0; rank < trials.size(); ++rank) {
    const HpoTrial& t = trials[rank];
    RunConfig trial_config = config;
    trial_config.train = t.config;
    json entry;
    entry["rank"] = rank + 1;
    entry["trial"] = t.index;
    entry["mAP"] = t.map;
    entry["cmc"] = scores_to_json(t.scores, config.eval.ranks)["cmc"];
    entry["config"] = run_config_to_json(trial_config);
    list.push_back(entry);
  }
  doc["trials"] = list;
  std::cout << doc.dump(2) << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
      throw IoError(IoError::Code::kOpenFailed, "cannot open for writing: " + out_path);
    }
    out << doc.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Video person re-identification engine on synthetic tracklets"};
  app.require_subcommand(1);

  std::string config_path, data_path, checkpoint_path, init_path, out_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->required();
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic tracklet file");
  add_common(synth);
  synth->add_option("--out", out_path, "Output tracklet file")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model on a tracklet file");
  add_common(train);
  train->add_option("--data", data_path, "Input tracklet file")->required();
  train->add_option("--out", out_path, "Output checkpoint")->required();
  train->add_option("--init", init_path, "Checkpoint to finetune from");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint (CMC/mAP)");
  add_common(eval);
  eval->add_option("--data", data_path, "Input tracklet file")->required();
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint to evaluate")
      ->required();
  eval->add_option("--out", out_path, "Optional scores JSON file");

  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "Verify gradients against finite differences");
  add_common(gradcheck);

  CLI::App* hpo = app.add_subcommand("hpo", "Random-search hyperparameters");
  add_common(hpo);
  hpo->add_option("--data", data_path, "Input tracklet file")->required();
  hpo->add_option("--out", out_path, "Optional trials JSON file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    RunConfig config = load_run_config(config_path);
    if (synth->parsed()) return cmd_synth(config, out_path);
    if (train->parsed()) return cmd_train(config, data_path, out_path, init_path);
    if (eval->parsed()) return cmd_eval(config, data_path, checkpoint_path, out_path);
    if (gradcheck->parsed()) return cmd_gradcheck(config);
    if (hpo->parsed()) return cmd_hpo(config, data_path, out_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

}  // namespace reid
