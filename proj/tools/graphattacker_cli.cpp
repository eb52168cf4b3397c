// Command-line driver: target-model training, attack execution, the
// adversarial-training defense harness, and report emission.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "graphattacker/report.hpp"

namespace fs = std::filesystem;
using namespace gat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

void emit_error(const std::string& type, const std::string& message) {
  json j;
  j["error"] = message;
  j["type"] = type;
  std::cerr << j.dump() << '\n';
}

// Registers every ExperimentConfig field as an overridable flag.
void add_config_flags(CLI::App* app, ExperimentConfig& cfg) {
  app->add_option("--task", cfg.task, "node | graph | link");
  app->add_option("--dataset", cfg.dataset, "dataset directory");
  app->add_option("--format", cfg.format, "edgelist | tu");
  app->add_option("--tu-name", cfg.tu_name, "dataset name inside a TU directory");
  app->add_option("--train-ratio", cfg.train_ratio, "training split ratio");
  app->add_option("--val-ratio", cfg.val_ratio, "validation split ratio");
  app->add_option("--strategy", cfg.strategy, "structure | attribute | hybrid");
  app->add_option("--scale", cfg.scale, "direct | indirect | unlimited");
  app->add_option("-K,--k-hops", cfg.k_hops, "subgraph hop count");
  app->add_option("--profile", cfg.profile, "B-GA | D-GA | S-GA | custom");
  app->add_option("--budget-ratio", cfg.budget_ratio, "perturbation ratio r");
  app->add_option_function<double>(
      "--lambda-threshold", [&cfg](const double& v) { cfg.lambda_threshold = v; },
      "custom profile: Lambda cap");
  app->add_option_function<double>(
      "--smr-threshold", [&cfg](const double& v) { cfg.smr_threshold = v; },
      "custom profile: SMR cap");
  app->add_option_function<double>(
      "--l2-threshold", [&cfg](const double& v) { cfg.l2_threshold = v; },
      "custom profile: attribute L2 cap");
  app->add_option("--ad-mode", cfg.ad_mode, "frozen_target | trainable_surrogate");
  app->add_option("--method", cfg.method, "ga | dice");
  app->add_option("--hidden", cfg.hidden_dim, "GCN hidden width");
  app->add_option("--sd-hidden", cfg.sd_hidden, "SD hidden width");
  app->add_option("--embedding-dim", cfg.embedding_dim, "encoder embedding width");
  app->add_option("--attack-lr", cfg.attack_lr, "MAG/SD/AD learning rate");
  app->add_option("--target-lr", cfg.target_lr, "target model learning rate");
  app->add_option("--target-epochs", cfg.target_epochs, "target training epochs");
  app->add_option("--k-sd", cfg.k_sd, "SD steps per epoch");
  app->add_option("--k-mag", cfg.k_mag, "MAG steps per epoch");
  app->add_option("--k-ad", cfg.k_ad, "AD steps per epoch");
  app->add_option("--per-class", cfg.per_class, "targets per class");
  app->add_option("--examples-per-target", cfg.examples_per_target,
                  "adversarial examples attempted per instance");
  app->add_option("--epochs-per-restart", cfg.epochs_per_restart,
                  "training epochs per attempted example");
  app->add_option("--seed", cfg.seed, "base RNG seed");
  app->add_option("--jobs", cfg.jobs, "parallel attack tasks (0 = all cores)");
  app->add_option("--out", cfg.out_dir, "output directory");
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open config file: " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

int cmd_train(const ExperimentConfig& cfg, const std::string& out_path) {
  cfg.validate();
  const LoadedData data = load_data(cfg);
  const TrainedTarget target = train_target(cfg, data, std::nullopt);
  Checkpoint ck;
  if (data.task == TaskKind::node)
    ck = checkpoint_of(std::get<NodeClassifier>(target.model));
  else if (data.task == TaskKind::graph)
    ck = checkpoint_of(std::get<GraphClassifier>(target.model));
  else
    ck = checkpoint_of(std::get<LinkPredictor>(target.model));
  ck.meta["seed"] = std::to_string(cfg.seed);
  save_checkpoint(ck, out_path);
  const char* metric = data.task == TaskKind::link ? "test_auc" : "test_accuracy";
  std::cout << "task=" << cfg.task << ' ' << metric << '=' << target.clean_metric
            << " checkpoint=" << out_path << '\n';
  return kExitOk;
}

int cmd_attack(ExperimentConfig cfg, const std::string& checkpoint_path, bool dry_run) {
  cfg.apply_profile();
  cfg.validate();
  if (dry_run) {
    std::cout << config_to_json(cfg).dump(2) << '\n';
    return kExitOk;
  }
  std::optional<Checkpoint> ck;
  if (!checkpoint_path.empty()) {
    ck = load_checkpoint(checkpoint_path);
    if (task_name(ck->task) != cfg.task) {
      emit_error("config", "checkpoint task does not match --task");
      return kExitUsage;
    }
  }
  const ExperimentResult res = run_experiment(cfg, ck);
  write_results(res, cfg.out_dir);
  std::cout << "asr=" << res.metrics.asr << " aml=" << res.metrics.aml
            << " ama=" << res.metrics.ama << " attacked=" << res.metrics.attacked
            << " out=" << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_defense(ExperimentConfig cfg, int n_per_target) {
  cfg.apply_profile();
  cfg.validate();
  const DefenseReport rep = run_defense(cfg, n_per_target);
  fs::create_directories(cfg.out_dir);
  const json j = defense_to_json(rep, config_to_json(cfg), cfg.method);
  write_text_file((fs::path(cfg.out_dir) / "defense.json").string(), j.dump(2) + "\n");
  std::cout << "clean_asr=" << rep.clean_asr << " retrained_asr=" << rep.retrained_asr
            << " out=" << cfg.out_dir << '\n';
  return kExitOk;
}

int cmd_report(const std::string& results_path, const std::string& kind,
               const std::string& out_dir) {
  fs::create_directories(out_dir);
  if (kind == "defense") {
    std::ifstream in(results_path);
    if (!in) throw DatasetError("cannot open defense results: " + results_path);
    json j;
    in >> j;
    if (j.value("schema", "") != "graphattacker-defense-v1")
      throw ParseError("defense results: missing schema tag at $.schema");
    write_text_file((fs::path(out_dir) / "defense.csv").string(), defense_csv(j));
    return kExitOk;
  }

  const ExperimentResult res = read_results(results_path);
  if (kind == "metrics") {
    write_text_file((fs::path(out_dir) / "metrics.csv").string(), metrics_csv(res));
    return kExitOk;
  }

  // similarity-hist: rebuild graphs and embeddings next to the dataset
  const LoadedData data = load_data(res.config);
  if (data.task == TaskKind::graph)
    throw ContractError("similarity-hist applies to node and link tasks");
  const DenseMatrix& w0 = res.target_checkpoint.params.at("W0");
  const DenseMatrix& w1 = res.target_checkpoint.params.at("W1");
  const EmbeddingFn embed = [&](const Graph& g) {
    return gcn2_forward_sparse(SparseNormAdj::build(g), SparseAttr::build(g), w0, w1,
                               GcnFinal::softmax)
        .out;
  };
  const SimilarityHistogram linked = similarity_distribution_linked(
      data.graph, embed, 40, substream_seed(res.config.seed, 21));
  write_text_file((fs::path(out_dir) / "similarity_hist.csv").string(),
                  histogram_csv(linked, "linked_count", "unlinked_count"));

  std::vector<Graph> adv_store;
  std::vector<int> adv_targets;
  for (std::size_t i = 0; i < res.metrics.records.size(); ++i) {
    const TargetRecord& r = res.metrics.records[i];
    if (!r.success || data.task != TaskKind::node) continue;
    adv_store.push_back(apply_edits(data.graph, res.edits[i]));
    adv_targets.push_back(r.ids[0]);
  }
  if (!adv_store.empty()) {
    std::vector<std::pair<int, const Graph*>> attacked;
    for (std::size_t i = 0; i < adv_store.size(); ++i)
      attacked.emplace_back(adv_targets[i], &adv_store[i]);
    const SimilarityHistogram shift =
        similarity_distribution_targets(data.graph, attacked, embed, 40);
    write_text_file((fs::path(out_dir) / "similarity_target_shift.csv").string(),
                    histogram_csv(shift, "before_count", "after_count"));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GraphAttacker: multi-task adversarial attacks on graph models"};
  app.require_subcommand(1);

  ExperimentConfig train_cfg, attack_cfg, defense_cfg;
  std::string train_out = "model.ckpt";
  std::string attack_checkpoint;
  std::string config_file_train, config_file_attack, config_file_defense;
  bool dry_run = false;
  int n_per_target = 10;
  std::string report_results, report_kind = "metrics", report_out = "report";

  CLI::App* train = app.add_subcommand("train", "train and persist a target model");
  train->add_option("--config", config_file_train, "JSON config file");
  add_config_flags(train, train_cfg);
  train->add_option("--out-checkpoint", train_out, "checkpoint output path");

  CLI::App* attack = app.add_subcommand("attack", "run the attack experiment");
  attack->add_option("--config", config_file_attack, "JSON config file");
  add_config_flags(attack, attack_cfg);
  attack->add_option("--checkpoint", attack_checkpoint, "pre-trained target checkpoint");
  attack->add_flag("--dry-run", dry_run, "validate and echo the config, no computation");

  CLI::App* defense = app.add_subcommand("defense", "adversarial-training defense harness");
  defense->add_option("--config", config_file_defense, "JSON config file");
  add_config_flags(defense, defense_cfg);
  defense->add_option("--examples-per-node", n_per_target,
                      "adversarial training examples per target");

  CLI::App* report = app.add_subcommand("report", "derive artifacts from results");
  report->add_option("--results", report_results,
                     "results directory (or defense.json for --kind defense)")
      ->required();
  report->add_option("--kind", report_kind, "metrics | similarity-hist | defense")
      ->check(CLI::IsMember({"metrics", "similarity-hist", "defense"}));
  report->add_option("--out", report_out, "artifact output directory");

  try {
    app.parse(argc, argv);
    // When a config file is given, load it as the baseline and re-parse so
    // explicit command-line flags win over the file.
    const auto reparse_with_file = [&](ExperimentConfig& cfg, const std::string& file) {
      if (file.empty()) return;
      cfg = load_config_file(file);
      app.clear();
      app.parse(argc, argv);
    };
    if (train->parsed()) reparse_with_file(train_cfg, config_file_train);
    if (attack->parsed()) reparse_with_file(attack_cfg, config_file_attack);
    if (defense->parsed()) reparse_with_file(defense_cfg, config_file_defense);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    emit_error("config", e.what());
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_train(train_cfg, train_out);
    if (attack->parsed()) return cmd_attack(attack_cfg, attack_checkpoint, dry_run);
    if (defense->parsed()) return cmd_defense(defense_cfg, n_per_target);
    if (report->parsed()) return cmd_report(report_results, report_kind, report_out);
  } catch (const ContractError& e) {
    emit_error("contract", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    emit_error("parse", e.what());
    return kExitUsage;
  } catch (const DatasetError& e) {
    emit_error("dataset", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
