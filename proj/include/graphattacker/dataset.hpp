#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graphattacker/graph.hpp"

namespace gat {
namespace detail {

inline std::vector<std::string> read_nonempty_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    bool blank = true;
    for (char c : line)
      if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
    if (!blank) lines.push_back(line);
  }
  return lines;
}

inline long parse_int(const std::string& token, const std::string& context) {
  long value = 0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError("non-numeric token '" + token + "' in " + context);
  return value;
}

inline double parse_double(const std::string& token, const std::string& context) {
  try {
    std::size_t pos = 0;
    double v = std::stod(token, &pos);
    if (pos != token.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("non-numeric token '" + token + "' in " + context);
  }
}

// Splits on commas and whitespace.
inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

// Reads a 0-indexed "src dst" edge list plus optional attribute and label
// files. Node count comes from the label file, else the attribute file, else
// max node id + 1; attributes default to the identity matrix.
inline Graph load_edge_list(const std::string& edge_path,
                            const std::optional<std::string>& attr_path = std::nullopt,
                            const std::optional<std::string>& label_path = std::nullopt) {
  std::vector<std::pair<int, int>> edges;
  long max_id = -1;
  for (const auto& line : detail::read_nonempty_lines(edge_path)) {
    const auto toks = detail::tokenize(line);
    if (toks.size() != 2) throw ParseError("expected 'src dst' in " + edge_path);
    const long a = detail::parse_int(toks[0], edge_path);
    const long b = detail::parse_int(toks[1], edge_path);
    if (a < 0 || b < 0) throw DatasetError("negative node id in " + edge_path);
    max_id = std::max({max_id, a, b});
    edges.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }

  std::vector<int> labels;
  if (label_path) {
    for (const auto& line : detail::read_nonempty_lines(*label_path))
      labels.push_back(static_cast<int>(detail::parse_int(detail::tokenize(line).at(0),
                                                          *label_path)));
  }

  DenseMatrix attrs;
  AttributeKind kind = AttributeKind::binary;
  if (attr_path) {
    const auto lines = detail::read_nonempty_lines(*attr_path);
    const int rows = static_cast<int>(lines.size());
    const bool sparse = !lines.empty() && lines.front().find(':') != std::string::npos;
    if (sparse) {
      std::vector<std::vector<std::pair<int, double>>> entries(rows);
      long dim = 0;
      for (int r = 0; r < rows; ++r) {
        for (const auto& tok : detail::tokenize(lines[r])) {
          const auto colon = tok.find(':');
          if (colon == std::string::npos)
            throw ParseError("expected index:value token in " + *attr_path);
          const long idx = detail::parse_int(tok.substr(0, colon), *attr_path);
          const double val = detail::parse_double(tok.substr(colon + 1), *attr_path);
          if (idx < 0) throw DatasetError("negative attribute index in " + *attr_path);
          dim = std::max(dim, idx + 1);
          entries[r].emplace_back(static_cast<int>(idx), val);
        }
      }
      attrs = DenseMatrix(rows, static_cast<int>(dim));
      for (int r = 0; r < rows; ++r)
        for (const auto& [c, v] : entries[r]) attrs(r, c) = v;
    } else {
      std::vector<std::vector<double>> values(rows);
      std::size_t dim = 0;
      for (int r = 0; r < rows; ++r) {
        for (const auto& tok : detail::tokenize(lines[r]))
          values[r].push_back(detail::parse_double(tok, *attr_path));
        if (r == 0)
          dim = values[r].size();
        else if (values[r].size() != dim)
          throw DatasetError("ragged attribute rows in " + *attr_path);
      }
      attrs = DenseMatrix(rows, static_cast<int>(dim));
      for (int r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < dim; ++c) attrs(r, c) = values[r][c];
    }
    for (double v : attrs.data)
      if (v != 0.0 && v != 1.0) kind = AttributeKind::continuous;
  }

  int n;
  if (!labels.empty())
    n = static_cast<int>(labels.size());
  else if (attrs.rows > 0)
    n = attrs.rows;
  else
    n = static_cast<int>(max_id + 1);

  if (max_id >= n) throw DatasetError("node id out of range in " + edge_path);
  if (attrs.rows > 0 && attrs.rows != n)
    throw DatasetError("attribute/label row count mismatch for " + edge_path);

  return Graph::from_edges(n, std::move(edges), std::move(attrs), kind, std::move(labels));
}

// Reads a TU-format dataset directory: <name>_A.txt (1-indexed edge pairs),
// <name>_graph_indicator.txt, <name>_graph_labels.txt, plus optional
// <name>_node_labels.txt / <name>_node_attributes.txt. Node labels become
// one-hot attributes when no attribute file exists; graph labels are remapped
// to 0..|Y|-1.
inline GraphSet load_tu_dataset(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  const auto path = [&](const std::string& suffix) {
    return (fs::path(dir) / (name + suffix)).string();
  };

  const auto indicator_lines = detail::read_nonempty_lines(path("_graph_indicator.txt"));
  const int total_nodes = static_cast<int>(indicator_lines.size());
  std::vector<int> graph_of(total_nodes);
  int num_graphs = 0;
  for (int v = 0; v < total_nodes; ++v) {
    const long gid = detail::parse_int(detail::tokenize(indicator_lines[v]).at(0),
                                       path("_graph_indicator.txt"));
    if (gid < 1) throw DatasetError(name + ": graph indicator must be 1-indexed");
    graph_of[v] = static_cast<int>(gid - 1);
    num_graphs = std::max<int>(num_graphs, static_cast<int>(gid));
  }

  const auto label_lines = detail::read_nonempty_lines(path("_graph_labels.txt"));
  if (static_cast<int>(label_lines.size()) != num_graphs)
    throw DatasetError(name + ": graph_indicator/graph_labels length mismatch");
  std::vector<long> raw_labels(num_graphs);
  std::map<long, int> label_map;
  for (int i = 0; i < num_graphs; ++i) {
    raw_labels[i] = detail::parse_int(detail::tokenize(label_lines[i]).at(0),
                                      path("_graph_labels.txt"));
    label_map.emplace(raw_labels[i], 0);
  }
  int next = 0;
  for (auto& [_, v] : label_map) v = next++;

  // node -> local index within its graph
  std::vector<int> local_of(total_nodes);
  std::vector<int> graph_size(num_graphs, 0);
  for (int v = 0; v < total_nodes; ++v) local_of[v] = graph_size[graph_of[v]]++;

  std::vector<std::vector<std::pair<int, int>>> edges(num_graphs);
  for (const auto& line : detail::read_nonempty_lines(path("_A.txt"))) {
    const auto toks = detail::tokenize(line);
    if (toks.size() != 2) throw ParseError("expected edge pair in " + path("_A.txt"));
    const long a = detail::parse_int(toks[0], path("_A.txt"));
    const long b = detail::parse_int(toks[1], path("_A.txt"));
    if (a < 1 || a > total_nodes || b < 1 || b > total_nodes)
      throw DatasetError(name + ": edge node id out of range");
    const int va = static_cast<int>(a - 1), vb = static_cast<int>(b - 1);
    if (graph_of[va] != graph_of[vb])
      throw DatasetError(name + ": edge crosses graph boundary");
    edges[graph_of[va]].emplace_back(local_of[va], local_of[vb]);
  }

  // Attributes: explicit file wins, then one-hot node labels, then constant 1.
  std::vector<std::vector<double>> node_attrs;
  int attr_dim = 0;
  const std::string attr_file = path("_node_attributes.txt");
  const std::string nlabel_file = path("_node_labels.txt");
  AttributeKind kind = AttributeKind::binary;
  if (fs::exists(attr_file)) {
    const auto lines = detail::read_nonempty_lines(attr_file);
    if (static_cast<int>(lines.size()) != total_nodes)
      throw DatasetError(name + ": node_attributes length mismatch");
    node_attrs.resize(total_nodes);
    for (int v = 0; v < total_nodes; ++v) {
      for (const auto& tok : detail::tokenize(lines[v]))
        node_attrs[v].push_back(detail::parse_double(tok, attr_file));
      if (v == 0)
        attr_dim = static_cast<int>(node_attrs[v].size());
      else if (static_cast<int>(node_attrs[v].size()) != attr_dim)
        throw DatasetError(name + ": ragged node_attributes rows");
    }
    kind = AttributeKind::continuous;
    bool binary = true;
    for (const auto& row : node_attrs)
      for (double x : row)
        if (x != 0.0 && x != 1.0) binary = false;
    if (binary) kind = AttributeKind::binary;
  } else if (fs::exists(nlabel_file)) {
    const auto lines = detail::read_nonempty_lines(nlabel_file);
    if (static_cast<int>(lines.size()) != total_nodes)
      throw DatasetError(name + ": node_labels length mismatch");
    std::vector<long> raw(total_nodes);
    std::map<long, int> nmap;
    for (int v = 0; v < total_nodes; ++v) {
      raw[v] = detail::parse_int(detail::tokenize(lines[v]).at(0), nlabel_file);
      nmap.emplace(raw[v], 0);
    }
    int idx = 0;
    for (auto& [_, val] : nmap) val = idx++;
    attr_dim = idx;
    node_attrs.assign(total_nodes, std::vector<double>(attr_dim, 0.0));
    for (int v = 0; v < total_nodes; ++v) node_attrs[v][nmap.at(raw[v])] = 1.0;
  } else {
    attr_dim = 1;
    node_attrs.assign(total_nodes, {1.0});
  }

  GraphSet set;
  set.num_classes = next;
  std::vector<std::vector<int>> members(num_graphs);
  for (int v = 0; v < total_nodes; ++v) members[graph_of[v]].push_back(v);
  for (int gidx = 0; gidx < num_graphs; ++gidx) {
    DenseMatrix attrs(graph_size[gidx], attr_dim);
    for (int v : members[gidx])
      for (int c = 0; c < attr_dim; ++c) attrs(local_of[v], c) = node_attrs[v][c];
    set.graphs.push_back(Graph::from_edges(graph_size[gidx], std::move(edges[gidx]),
                                           std::move(attrs), kind));
    set.graph_labels.push_back(label_map.at(raw_labels[gidx]));
  }
  set.validate();
  return set;
}

// Writes a graph back to the edge-list text format (one "src dst" pair per
// line, 0-indexed, each undirected edge once).
inline void write_edge_list(const Graph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write file: " + path);
  for (const auto& [i, j] : g.edges()) out << i << ' ' << j << '\n';
}

}  // namespace gat
