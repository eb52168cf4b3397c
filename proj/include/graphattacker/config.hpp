#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "graphattacker/models.hpp"
#include "graphattacker/stealth.hpp"
#include "graphattacker/strategy.hpp"

namespace gat {

using nlohmann::json;

// Full experiment manifest. Every field can come from a JSON config file and
// be overridden on the command line; the effective config is echoed into
// every output artifact.
struct ExperimentConfig {
  std::string task = "node";          // node | graph | link
  std::string dataset;                // dataset directory
  std::string format = "edgelist";    // edgelist | tu
  std::string tu_name;                // dataset name inside a TU directory

  double train_ratio = -1.0;  // negative = task default (node 0.2, else 0.8)
  double val_ratio = -1.0;    // negative = task default (node 0.4, else 0.1)

  std::string strategy = "structure";  // structure | attribute | hybrid
  std::string scale = "direct";        // direct | indirect | unlimited
  int k_hops = 3;

  std::string profile = "B-GA";  // B-GA | D-GA | S-GA | custom
  double budget_ratio = 0.05;
  std::optional<double> lambda_threshold;
  std::optional<double> smr_threshold;
  std::optional<double> l2_threshold;

  std::string ad_mode = "frozen_target";  // frozen_target | trainable_surrogate
  std::string method = "ga";              // ga | dice

  int hidden_dim = 64;
  int sd_hidden = 64;
  int embedding_dim = 16;  // MAG embedding width for graph/link tasks
  double attack_lr = 0.03;
  double target_lr = 0.01;
  int target_epochs = 200;
  int k_sd = 10;
  int k_mag = 10;
  int k_ad = 10;

  int per_class = 20;
  int examples_per_target = 20;  // restarts per instance
  int epochs_per_restart = 20;

  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = all cores
  std::string out_dir = "out";

  TaskKind task_kind() const { return task_from_name(task); }
  AttackStrategy strategy_kind() const { return strategy_from_name(strategy); }
  AttackScale scale_kind() const { return scale_from_name(scale); }

  double effective_train_ratio() const {
    if (train_ratio >= 0) return train_ratio;
    return task_kind() == TaskKind::node ? 0.2 : 0.8;
  }
  double effective_val_ratio() const {
    if (val_ratio >= 0) return val_ratio;
    return task_kind() == TaskKind::node ? 0.4 : 0.1;
  }

  void validate() const {
    task_kind();
    strategy_kind();
    scale_kind();
    if (profile != "B-GA" && profile != "D-GA" && profile != "S-GA" && profile != "custom")
      throw ContractError("unknown profile: " + profile);
    if (ad_mode != "frozen_target" && ad_mode != "trainable_surrogate")
      throw ContractError("unknown ad_mode: " + ad_mode);
    if (method != "ga" && method != "dice")
      throw ContractError("unknown method: " + method);
    const double tr = effective_train_ratio(), vr = effective_val_ratio();
    if (tr <= 0 || vr < 0 || tr + vr >= 1.0)
      throw ContractError("split ratios must satisfy 0 < train, train + val < 1");
    if (k_hops < 1) throw ContractError("K must be >= 1");
    if (per_class < 1 || examples_per_target < 1 || epochs_per_restart < 1)
      throw ContractError("counts must be positive");
    if (budget_ratio < 0) throw ContractError("budget ratio must be nonnegative");
  }

  // Constraint thresholds for the named profile. The budget delta is resolved
  // against a concrete graph later (per task and strategy).
  void apply_profile() {
    if (profile == "B-GA") {
      lambda_threshold.reset();
      smr_threshold.reset();
    } else if (profile == "D-GA") {
      lambda_threshold = 0.004;
      smr_threshold.reset();
    } else if (profile == "S-GA") {
      lambda_threshold = 0.004;
      smr_threshold = 0.05;
    }
    // custom: take the thresholds as given
  }

  AugmentationMode augmentation() const {
    if (task_kind() == TaskKind::graph) return AugmentationMode::none;
    return profile == "S-GA" ? AugmentationMode::high_similarity
                             : AugmentationMode::random_other_class;
  }

  ConstraintSet constraints_for(int n_nodes, int n_edges) const {
    ConstraintSet c;
    c.budget_ratio = budget_ratio;
    c.delta = ConstraintSet::resolve_delta(budget_ratio, task_kind(), strategy_kind(),
                                           n_nodes, n_edges);
    c.lambda_threshold = lambda_threshold;
    c.smr_threshold = smr_threshold;
    c.l2_threshold = l2_threshold;
    return c;
  }
};

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = c.task;
  j["dataset"] = c.dataset;
  j["format"] = c.format;
  j["tu_name"] = c.tu_name;
  j["train_ratio"] = c.train_ratio;
  j["val_ratio"] = c.val_ratio;
  j["strategy"] = c.strategy;
  j["scale"] = c.scale;
  j["k_hops"] = c.k_hops;
  j["profile"] = c.profile;
  j["budget_ratio"] = c.budget_ratio;
  if (c.lambda_threshold) j["lambda_threshold"] = *c.lambda_threshold;
  if (c.smr_threshold) j["smr_threshold"] = *c.smr_threshold;
  if (c.l2_threshold) j["l2_threshold"] = *c.l2_threshold;
  j["ad_mode"] = c.ad_mode;
  j["method"] = c.method;
  j["hidden_dim"] = c.hidden_dim;
  j["sd_hidden"] = c.sd_hidden;
  j["embedding_dim"] = c.embedding_dim;
  j["attack_lr"] = c.attack_lr;
  j["target_lr"] = c.target_lr;
  j["target_epochs"] = c.target_epochs;
  j["k_sd"] = c.k_sd;
  j["k_mag"] = c.k_mag;
  j["k_ad"] = c.k_ad;
  j["per_class"] = c.per_class;
  j["examples_per_target"] = c.examples_per_target;
  j["epochs_per_restart"] = c.epochs_per_restart;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["out_dir"] = c.out_dir;
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("task", c.task);
  get("dataset", c.dataset);
  get("format", c.format);
  get("tu_name", c.tu_name);
  get("train_ratio", c.train_ratio);
  get("val_ratio", c.val_ratio);
  get("strategy", c.strategy);
  get("scale", c.scale);
  get("k_hops", c.k_hops);
  get("profile", c.profile);
  get("budget_ratio", c.budget_ratio);
  if (j.contains("lambda_threshold")) c.lambda_threshold = j.at("lambda_threshold").get<double>();
  if (j.contains("smr_threshold")) c.smr_threshold = j.at("smr_threshold").get<double>();
  if (j.contains("l2_threshold")) c.l2_threshold = j.at("l2_threshold").get<double>();
  get("ad_mode", c.ad_mode);
  get("method", c.method);
  get("hidden_dim", c.hidden_dim);
  get("sd_hidden", c.sd_hidden);
  get("embedding_dim", c.embedding_dim);
  get("attack_lr", c.attack_lr);
  get("target_lr", c.target_lr);
  get("target_epochs", c.target_epochs);
  get("k_sd", c.k_sd);
  get("k_mag", c.k_mag);
  get("k_ad", c.k_ad);
  get("per_class", c.per_class);
  get("examples_per_target", c.examples_per_target);
  get("epochs_per_restart", c.epochs_per_restart);
  get("seed", c.seed);
  get("jobs", c.jobs);
  get("out_dir", c.out_dir);
  return c;
}

}  // namespace gat
