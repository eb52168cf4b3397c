#pragma once

#include <fstream>
#include <iomanip>

#include "graphattacker/experiment.hpp"

namespace gat {

inline json record_to_json(const TargetRecord& r, const GraphEdits& e) {
  json j;
  j["ids"] = r.ids;
  j["y_true"] = r.y_true;
  j["y_target"] = r.y_target;
  j["success"] = r.success;
  j["trivial"] = r.trivial;
  j["has_candidate"] = r.has_candidate;
  j["links_changed"] = r.links_changed;
  j["attrs_changed"] = r.attrs_changed;
  j["l2_attr"] = r.l2_attr;
  if (r.lambda_stat) j["lambda"] = *r.lambda_stat;
  if (r.smr_value) j["smr"] = *r.smr_value;
  j["epochs_used"] = r.epochs_used;
  j["restarts_used"] = r.restarts_used;
  j["subgraph_size"] = r.subgraph_size;
  j["reverified"] = r.reverified;
  json je;
  je["added_links"] = e.added_links;
  je["removed_links"] = e.removed_links;
  json attrs = json::array();
  for (const auto& [i, c, v] : e.attr_changes) attrs.push_back({i, c, v});
  je["attr_changes"] = attrs;
  j["edits"] = je;
  return j;
}

inline std::pair<TargetRecord, GraphEdits> record_from_json(const json& j) {
  TargetRecord r;
  r.ids = j.at("ids").get<std::vector<int>>();
  r.y_true = j.at("y_true").get<int>();
  r.y_target = j.value("y_target", -1);
  r.success = j.at("success").get<bool>();
  r.trivial = j.value("trivial", false);
  r.has_candidate = j.value("has_candidate", false);
  r.links_changed = j.at("links_changed").get<int>();
  r.attrs_changed = j.at("attrs_changed").get<int>();
  r.l2_attr = j.value("l2_attr", 0.0);
  if (j.contains("lambda")) r.lambda_stat = j.at("lambda").get<double>();
  if (j.contains("smr")) r.smr_value = j.at("smr").get<double>();
  r.epochs_used = j.value("epochs_used", 0);
  r.restarts_used = j.value("restarts_used", 0);
  r.subgraph_size = j.value("subgraph_size", 0);
  r.reverified = j.value("reverified", false);
  GraphEdits e;
  const json& je = j.at("edits");
  for (const auto& p : je.at("added_links"))
    e.added_links.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  for (const auto& p : je.at("removed_links"))
    e.removed_links.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  for (const auto& p : je.at("attr_changes"))
    e.attr_changes.emplace_back(p.at(0).get<int>(), p.at(1).get<int>(),
                                p.at(2).get<double>());
  return {std::move(r), std::move(e)};
}

inline json result_to_json(const ExperimentResult& res) {
  json j;
  j["schema"] = "graphattacker-results-v1";
  j["config"] = config_to_json(res.config);
  j["clean_metric"] = res.clean_metric;
  j["target_shortfall"] = res.target_shortfall;
  j["wall_seconds"] = res.wall_seconds;
  json agg;
  agg["attacked"] = res.metrics.attacked;
  agg["successes"] = res.metrics.successes;
  agg["asr"] = res.metrics.asr;
  agg["aml"] = res.metrics.aml;
  agg["ama"] = res.metrics.ama;
  agg["l2_mean"] = res.metrics.l2_mean;
  j["aggregate"] = agg;
  json records = json::array();
  for (std::size_t i = 0; i < res.metrics.records.size(); ++i)
    records.push_back(record_to_json(res.metrics.records[i], res.edits[i]));
  j["records"] = records;
  return j;
}

inline ExperimentResult result_from_json(const json& j) {
  if (j.value("schema", "") != "graphattacker-results-v1")
    throw ParseError("results file: missing or unknown schema tag");
  ExperimentResult res;
  res.config = config_from_json(j.at("config"));
  res.clean_metric = j.at("clean_metric").get<double>();
  res.target_shortfall = j.value("target_shortfall", false);
  res.wall_seconds = j.value("wall_seconds", 0.0);
  std::vector<TargetRecord> records;
  for (const auto& rj : j.at("records")) {
    auto [r, e] = record_from_json(rj);
    records.push_back(std::move(r));
    res.edits.push_back(std::move(e));
  }
  res.metrics = aggregate_metrics(std::move(records));
  return res;
}

// ---------------------------------------------------------------------------
// File emission

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write file: " + path);
  out << content;
}

inline void write_results(const ExperimentResult& res, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_text_file((fs::path(dir) / "results.json").string(), result_to_json(res).dump(2) + "\n");

  std::ostringstream csv;
  csv << "ids,y_true,y_target,success,trivial,links_changed,attrs_changed,l2_attr,lambda,"
         "smr,epochs_used,restarts_used,subgraph_size,reverified\n";
  for (const auto& r : res.metrics.records) {
    csv << '"';
    for (std::size_t k = 0; k < r.ids.size(); ++k) csv << (k ? " " : "") << r.ids[k];
    csv << '"' << ',' << r.y_true << ',' << r.y_target << ',' << (r.success ? 1 : 0) << ','
        << (r.trivial ? 1 : 0) << ',' << r.links_changed << ',' << r.attrs_changed << ','
        << r.l2_attr << ',';
    if (r.lambda_stat) csv << *r.lambda_stat;
    csv << ',';
    if (r.smr_value) csv << *r.smr_value;
    csv << ',' << r.epochs_used << ',' << r.restarts_used << ',' << r.subgraph_size << ','
        << (r.reverified ? 1 : 0) << '\n';
  }
  write_text_file((fs::path(dir) / "results.csv").string(), csv.str());
  save_checkpoint(res.target_checkpoint, (fs::path(dir) / "target.ckpt").string());
}

inline ExperimentResult read_results(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "results.json");
  if (!in) throw DatasetError("cannot open results.json in " + dir);
  json j;
  in >> j;
  ExperimentResult res = result_from_json(j);
  const auto ckpt = fs::path(dir) / "target.ckpt";
  if (fs::exists(ckpt)) res.target_checkpoint = load_checkpoint(ckpt.string());
  return res;
}

inline std::string metrics_csv(const ExperimentResult& res) {
  std::ostringstream csv;
  csv << "asr,aml,ama,l2_mean,attacked,successes,clean_metric\n";
  csv << res.metrics.asr << ',' << res.metrics.aml << ',' << res.metrics.ama << ','
      << res.metrics.l2_mean << ',' << res.metrics.attacked << ',' << res.metrics.successes
      << ',' << res.clean_metric << '\n';
  return csv.str();
}

inline std::string histogram_csv(const SimilarityHistogram& h, const char* left_name,
                                 const char* right_name) {
  std::ostringstream csv;
  csv << "bin_left,bin_right," << left_name << ',' << right_name << '\n';
  for (std::size_t b = 0; b < h.linked_counts.size(); ++b)
    csv << h.bin_edges[b] << ',' << h.bin_edges[b + 1] << ',' << h.linked_counts[b] << ','
        << h.unlinked_counts[b] << '\n';
  return csv.str();
}

inline json defense_to_json(const DefenseReport& d, const json& config_echo,
                            const std::string& method) {
  json j;
  j["schema"] = "graphattacker-defense-v1";
  j["config"] = config_echo;
  j["method"] = method;
  j["clean_asr"] = d.clean_asr;
  j["retrained_asr"] = d.retrained_asr;
  j["clean_accuracy_before"] = d.clean_accuracy_before;
  j["clean_accuracy_after"] = d.clean_accuracy_after;
  j["examples_generated"] = d.examples_generated;
  j["examples_failed"] = d.examples_failed;
  return j;
}

inline std::string defense_csv(const json& defense) {
  std::ostringstream csv;
  csv << "method,clean_asr,retrained_asr,clean_accuracy_before,clean_accuracy_after\n";
  csv << defense.at("method").get<std::string>() << ','
      << defense.at("clean_asr").get<double>() << ','
      << defense.at("retrained_asr").get<double>() << ','
      << defense.at("clean_accuracy_before").get<double>() << ','
      << defense.at("clean_accuracy_after").get<double>() << '\n';
  return csv.str();
}

}  // namespace gat
