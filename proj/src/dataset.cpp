#include "slim/dataset.hpp"

#include "slim/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string_view>
#include <utility>

namespace slim {
namespace {

namespace fs = std::filesystem;

struct Line {
  std::size_t number;  // 1-based
  std::string_view text;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Splits into trimmed lines; trailing blank lines are dropped, interior blank
// lines are reported as parse errors.
std::vector<Line> split_lines(const std::string& content, const std::string& file_name) {
  std::vector<Line> lines;
  std::size_t start = 0;
  std::size_t number = 1;
  while (start <= content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    lines.push_back({number, trim(std::string_view(content).substr(start, end - start))});
    ++number;
    start = end + 1;
  }
  while (!lines.empty() && lines.back().text.empty()) lines.pop_back();
  for (const auto& line : lines) {
    if (line.text.empty()) {
      throw ParseError(file_name + ":" + std::to_string(line.number) + ": empty line");
    }
  }
  return lines;
}

long long parse_integer(std::string_view token, const std::string& file_name, std::size_t line) {
  token = trim(token);
  long long value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (token.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(file_name + ":" + std::to_string(line) + ": expected an integer, got '" +
                     std::string(token) + "'");
  }
  return value;
}

std::vector<long long> read_integer_column(const fs::path& path) {
  const std::string name = path.filename().string();
  const std::string content = read_file(path);
  std::vector<long long> values;
  for (const auto& line : split_lines(content, name)) {
    // Some TU files carry extra comma-separated columns; the first one is the label.
    std::string_view text = line.text;
    if (auto comma = text.find(','); comma != std::string_view::npos) text = text.substr(0, comma);
    values.push_back(parse_integer(text, name, line.number));
  }
  return values;
}

fs::path require_file(const fs::path& dir, const std::string& file) {
  fs::path p = dir / file;
  if (!fs::is_regular_file(p)) throw IoError("missing dataset file " + p.string());
  return p;
}

// Maps sorted distinct raw values to 0..m-1.
std::map<long long, int> densify(const std::vector<long long>& raw) {
  std::set<long long> distinct(raw.begin(), raw.end());
  std::map<long long, int> dense;
  int next = 0;
  for (long long v : distinct) dense.emplace(v, next++);
  return dense;
}

}  // namespace

std::size_t Graph::edge_count() const {
  double total = adjacency.sum();
  return static_cast<std::size_t>(total / 2.0 + 0.5);
}

DatasetBundle load_tu_dataset(const fs::path& root, const std::string& name) {
  fs::path dir = root;
  if (!fs::is_regular_file(dir / (name + "_A.txt")) && fs::is_directory(root / name)) dir = root / name;

  const fs::path a_path = require_file(dir, name + "_A.txt");
  const fs::path indicator_path = require_file(dir, name + "_graph_indicator.txt");
  const fs::path graph_labels_path = require_file(dir, name + "_graph_labels.txt");
  const fs::path node_labels_path = dir / (name + "_node_labels.txt");

  DatasetBundle bundle;
  bundle.name = name;

  const std::vector<long long> indicator = read_integer_column(indicator_path);
  const std::vector<long long> graph_labels = read_integer_column(graph_labels_path);
  const auto graph_count = static_cast<long long>(graph_labels.size());
  const std::string indicator_name = indicator_path.filename().string();

  // node (0-based global) -> graph index and local index
  std::vector<int> node_graph(indicator.size());
  std::vector<int> node_local(indicator.size());
  std::vector<int> sizes(static_cast<std::size_t>(graph_count), 0);
  for (std::size_t v = 0; v < indicator.size(); ++v) {
    const long long gid = indicator[v];
    if (gid < 1 || gid > graph_count) {
      throw ParseError(indicator_name + ":" + std::to_string(v + 1) + ": graph id " + std::to_string(gid) +
                       " outside 1.." + std::to_string(graph_count));
    }
    node_graph[v] = static_cast<int>(gid - 1);
    node_local[v] = sizes[static_cast<std::size_t>(gid - 1)]++;
  }
  for (long long g = 0; g < graph_count; ++g) {
    if (sizes[static_cast<std::size_t>(g)] == 0) {
      throw ParseError(indicator_name + ": graph " + std::to_string(g + 1) + " has no nodes");
    }
  }

  bundle.graphs.resize(static_cast<std::size_t>(graph_count));
  for (long long g = 0; g < graph_count; ++g) {
    const int n = sizes[static_cast<std::size_t>(g)];
    bundle.graphs[static_cast<std::size_t>(g)].adjacency = Mat::Zero(n, n);
    bundle.graphs[static_cast<std::size_t>(g)].node_labels.assign(static_cast<std::size_t>(n), 0);
  }

  {
    const std::string a_name = a_path.filename().string();
    const std::string content = read_file(a_path);
    const auto node_total = static_cast<long long>(indicator.size());
    for (const auto& line : split_lines(content, a_name)) {
      const auto comma = line.text.find(',');
      if (comma == std::string_view::npos) {
        throw ParseError(a_name + ":" + std::to_string(line.number) + ": expected 'i, j'");
      }
      const long long i = parse_integer(line.text.substr(0, comma), a_name, line.number);
      const long long j = parse_integer(line.text.substr(comma + 1), a_name, line.number);
      for (long long endpoint : {i, j}) {
        if (endpoint < 1 || endpoint > node_total) {
          throw ParseError(a_name + ":" + std::to_string(line.number) + ": node " + std::to_string(endpoint) +
                           " is not listed in " + indicator_name);
        }
      }
      const auto u = static_cast<std::size_t>(i - 1);
      const auto v = static_cast<std::size_t>(j - 1);
      if (node_graph[u] != node_graph[v]) {
        throw ParseError(a_name + ":" + std::to_string(line.number) + ": edge joins nodes of different graphs");
      }
      if (u == v) {
        ++bundle.dropped_self_loops;
        continue;
      }
      Mat& adj = bundle.graphs[static_cast<std::size_t>(node_graph[u])].adjacency;
      const int lu = node_local[u];
      const int lv = node_local[v];
      // Each undirected edge normally appears once per direction; anything beyond that is a duplicate.
      if (adj(lu, lv) != 0.0) {
        ++bundle.dropped_duplicate_edges;
        continue;
      }
      adj(lu, lv) = 1.0;
    }
  }

  // Symmetrize: an edge listed in only one direction is added in the other.
  for (auto& g : bundle.graphs) g.adjacency = g.adjacency.cwiseMax(g.adjacency.transpose()).eval();

  if (fs::is_regular_file(node_labels_path)) {
    const std::vector<long long> raw = read_integer_column(node_labels_path);
    if (raw.size() != indicator.size()) {
      throw ParseError(node_labels_path.filename().string() + ": " + std::to_string(raw.size()) +
                       " labels for " + std::to_string(indicator.size()) + " nodes");
    }
    const auto dense = densify(raw);
    for (std::size_t v = 0; v < raw.size(); ++v) {
      bundle.graphs[static_cast<std::size_t>(node_graph[v])].node_labels[static_cast<std::size_t>(node_local[v])] =
          dense.at(raw[v]);
    }
    for (const auto& [value, index] : dense) bundle.raw_node_labels.push_back(value);
    bundle.node_label_count = static_cast<int>(dense.size());
  } else {
    bundle.node_labels_from_degree = true;
    int max_label = 0;
    for (auto& g : bundle.graphs) {
      for (Index v = 0; v < g.node_count(); ++v) {
        const int degree = static_cast<int>(g.adjacency.row(v).sum());
        const int label = std::min(degree, kDegreeLabelCap - 1);
        g.node_labels[static_cast<std::size_t>(v)] = label;
        max_label = std::max(max_label, label);
      }
    }
    bundle.node_label_count = max_label + 1;
    for (int l = 0; l <= max_label; ++l) bundle.raw_node_labels.push_back(l);
    bundle.warnings.push_back("no node-label file; using clamped degree as node label");
  }

  const auto class_dense = densify(graph_labels);
  for (long long g = 0; g < graph_count; ++g) {
    bundle.graphs[static_cast<std::size_t>(g)].class_label = class_dense.at(graph_labels[static_cast<std::size_t>(g)]);
  }
  for (const auto& [value, index] : class_dense) bundle.raw_class_labels.push_back(value);
  bundle.class_count = static_cast<int>(class_dense.size());

  if (bundle.dropped_self_loops > 0) {
    bundle.warnings.push_back("dropped " + std::to_string(bundle.dropped_self_loops) + " self-loops");
  }
  if (bundle.dropped_duplicate_edges > 0) {
    bundle.warnings.push_back("dropped " + std::to_string(bundle.dropped_duplicate_edges) + " duplicate edges");
  }
  return bundle;
}

void write_tu_dataset(const DatasetBundle& bundle, const fs::path& dir) {
  fs::create_directories(dir);
  auto open = [&](const std::string& suffix) {
    fs::path p = dir / (bundle.name + suffix);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
  };
  auto a_out = open("_A.txt");
  auto indicator_out = open("_graph_indicator.txt");
  auto graph_labels_out = open("_graph_labels.txt");
  auto node_labels_out = open("_node_labels.txt");

  long long offset = 0;
  for (std::size_t g = 0; g < bundle.graphs.size(); ++g) {
    const Graph& graph = bundle.graphs[g];
    const Index n = graph.node_count();
    for (Index p = 0; p < n; ++p) {
      for (Index q = 0; q < n; ++q) {
        if (graph.adjacency(p, q) != 0.0) a_out << (offset + p + 1) << ", " << (offset + q + 1) << '\n';
      }
      indicator_out << (g + 1) << '\n';
      node_labels_out << graph.node_labels[static_cast<std::size_t>(p)] << '\n';
    }
    graph_labels_out << graph.class_label << '\n';
    offset += n;
  }
}

Mat one_hot_features(const Graph& g, int c) {
  Mat x = Mat::Zero(g.node_count(), c);
  for (Index v = 0; v < g.node_count(); ++v) {
    const int label = g.node_labels[static_cast<std::size_t>(v)];
    if (label < 0 || label >= c) {
      throw RangeError("node " + std::to_string(v) + " has label " + std::to_string(label) + " outside [0, " +
                       std::to_string(c) + ")");
    }
    x(v, label) = 1.0;
  }
  return x;
}

std::vector<std::size_t> FoldPlan::validation_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::training_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(fold_count), 0);
  for (int f : assignments) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldPlan make_folds(const DatasetBundle& bundle, int fold_count, std::uint64_t seed) {
  if (fold_count < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(fold_count));
  if (static_cast<std::size_t>(fold_count) > bundle.graphs.size()) {
    throw ConfigError("fold count " + std::to_string(fold_count) + " exceeds graph count " +
                      std::to_string(bundle.graphs.size()));
  }
  FoldPlan plan;
  plan.fold_count = fold_count;
  plan.seed = seed;
  plan.assignments.assign(bundle.graphs.size(), -1);

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < bundle.graphs.size(); ++i) by_class[bundle.graphs[i].class_label].push_back(i);

  Rng rng(seed);
  int next_fold = 0;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    if (members.size() < static_cast<std::size_t>(fold_count)) {
      plan.relaxed = true;
      plan.warnings.push_back("class " + std::to_string(label) + " has " + std::to_string(members.size()) +
                              " graphs, fewer than " + std::to_string(fold_count) + " folds");
    }
    // Round-robin continues across classes so total fold sizes also stay within one.
    for (std::size_t idx : members) {
      plan.assignments[idx] = next_fold;
      next_fold = (next_fold + 1) % fold_count;
    }
  }
  return plan;
}

}  // namespace slim
