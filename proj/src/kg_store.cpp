#include "rarenet/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace rarenet {

std::string_view to_string(NodeType type) {
  switch (type) {
    case NodeType::Phenotype: return "phenotype";
    case NodeType::Gene: return "gene";
    case NodeType::Disease: return "disease";
    case NodeType::Other: return "other";
  }
  return "other";
}

std::optional<NodeType> parse_node_type(std::string_view token) {
  if (token == "phenotype") return NodeType::Phenotype;
  if (token == "gene") return NodeType::Gene;
  if (token == "disease") return NodeType::Disease;
  if (token == "other") return NodeType::Other;
  return std::nullopt;
}

FormatError::FormatError(const std::string& file, std::size_t line,
                         const std::string& what)
    : std::runtime_error(file + (line > 0 ? ":" + std::to_string(line) : "") +
                         ": " + what),
      line_(line) {}

std::size_t KnowledgeGraph::check(NodeId v) const {
  if (v < 0 || v >= node_count()) {
    throw std::out_of_range("node id " + std::to_string(v) + " outside [0, " +
                            std::to_string(node_count()) + ")");
  }
  return static_cast<std::size_t>(v);
}

std::optional<NodeId> KnowledgeGraph::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& KnowledgeGraph::relation(ArcId a) const {
  return relations_.at(relation_of_arc_.at(static_cast<std::size_t>(a)));
}

std::pair<ArcId, ArcId> KnowledgeGraph::arc_range(NodeId v) const {
  const std::size_t i = check(v);
  return {offsets_[i], offsets_[i + 1]};
}

std::vector<Neighbor> KnowledgeGraph::neighbors(NodeId v) const {
  const auto [first, last] = arc_range(v);
  std::vector<Neighbor> out;
  out.reserve(static_cast<std::size_t>(last - first));
  for (ArcId a = first; a < last; ++a) out.push_back({a, arcs_[a].dst});
  return out;
}

std::optional<ArcId> KnowledgeGraph::find_arc(NodeId src, NodeId dst) const {
  const auto [first, last] = arc_range(src);
  auto begin = arcs_.begin() + first;
  auto end = arcs_.begin() + last;
  auto it = std::lower_bound(begin, end, dst,
                             [](const Arc& a, NodeId d) { return a.dst < d; });
  if (it == end || it->dst != dst) return std::nullopt;
  return static_cast<ArcId>(it - arcs_.begin());
}

ArcId KnowledgeGraph::reverse(ArcId a) const {
  const Arc& fwd = arc(a);
  auto r = find_arc(fwd.dst, fwd.src);
  if (!r) throw std::logic_error("arc without reverse");
  return *r;
}

NodeId GraphBuilder::add_node(std::string key, NodeType type, std::string name) {
  if (index_.contains(key)) {
    throw std::invalid_argument("duplicate node id '" + key + "'");
  }
  const NodeId id = node_count();
  index_.emplace(key, id);
  types_.push_back(type);
  keys_.push_back(std::move(key));
  names_.push_back(std::move(name));
  return id;
}

bool GraphBuilder::has_edge(NodeId u, NodeId v) const {
  return edge_index_.contains({std::min(u, v), std::max(u, v)});
}

std::optional<NodeId> GraphBuilder::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool GraphBuilder::add_edge(NodeId u, NodeId v, std::string_view relation) {
  if (u < 0 || v < 0 || u >= node_count() || v >= node_count()) {
    throw std::out_of_range("edge endpoint outside node table");
  }
  if (u == v) throw std::invalid_argument("self-edge on node " + keys_[u]);
  const std::pair<NodeId, NodeId> key{std::min(u, v), std::max(u, v)};
  if (edge_index_.contains(key)) return false;
  std::string rel(relation);
  auto [it, inserted] = relation_index_.emplace(
      rel, static_cast<std::uint32_t>(relations_.size()));
  if (inserted) relations_.push_back(rel);
  edge_index_.emplace(key, edges_.size());
  edges_.push_back(key);
  edge_relation_.push_back(it->second);
  return true;
}

KnowledgeGraph GraphBuilder::build() && {
  KnowledgeGraph g;
  g.types_ = std::move(types_);
  g.keys_ = std::move(keys_);
  g.names_ = std::move(names_);
  g.index_ = std::move(index_);
  g.relations_ = std::move(relations_);

  struct Entry {
    Arc arc;
    std::uint32_t relation;
  };
  std::vector<Entry> entries;
  entries.reserve(edges_.size() * 2);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const auto [u, v] = edges_[e];
    entries.push_back({{u, v}, edge_relation_[e]});
    entries.push_back({{v, u}, edge_relation_[e]});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.arc.src, a.arc.dst) < std::tie(b.arc.src, b.arc.dst);
  });

  const auto n = static_cast<std::size_t>(g.node_count());
  g.offsets_.assign(n + 1, 0);
  g.arcs_.reserve(entries.size());
  g.relation_of_arc_.reserve(entries.size());
  for (const Entry& e : entries) {
    g.arcs_.push_back(e.arc);
    g.relation_of_arc_.push_back(e.relation);
    ++g.offsets_[static_cast<std::size_t>(e.arc.src) + 1];
  }
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  return g;
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool skip_line(std::string_view line) {
  return line.empty() || line.front() == '#';
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), 0, "cannot open file");
  return in;
}

}  // namespace

KnowledgeGraph load_graph(const std::filesystem::path& node_file,
                          const std::filesystem::path& edge_file) {
  GraphBuilder builder;
  {
    std::ifstream in = open_input(node_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (skip_line(line)) continue;
      const auto fields = split_tabs(line);
      if (fields.size() != 3 || fields[0].empty()) {
        throw FormatError(node_file.string(), lineno,
                          "expected node_id<TAB>type<TAB>name");
      }
      const auto type = parse_node_type(fields[1]);
      if (!type) {
        throw FormatError(node_file.string(), lineno,
                          "unknown node type '" + std::string(fields[1]) + "'");
      }
      if (builder.find(fields[0])) {
        throw FormatError(node_file.string(), lineno,
                          "duplicate node id '" + std::string(fields[0]) + "'");
      }
      builder.add_node(std::string(fields[0]), *type, std::string(fields[2]));
    }
  }
  {
    std::ifstream in = open_input(edge_file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (skip_line(line)) continue;
      const auto fields = split_tabs(line);
      if (fields.size() != 3 || fields[0].empty() || fields[2].empty()) {
        throw FormatError(edge_file.string(), lineno,
                          "expected src_id<TAB>relation<TAB>dst_id");
      }
      const auto u = builder.find(fields[0]);
      const auto v = builder.find(fields[2]);
      if (!u || !v) {
        throw FormatError(
            edge_file.string(), lineno,
            "edge references undeclared node '" +
                std::string(u ? fields[2] : fields[0]) + "'");
      }
      if (*u == *v) {
        throw FormatError(edge_file.string(), lineno,
                          "self-edge on '" + std::string(fields[0]) + "'");
      }
      builder.add_edge(*u, *v, fields[1]);
    }
  }
  return std::move(builder).build();
}

void write_graph(const KnowledgeGraph& g, const std::filesystem::path& node_file,
                 const std::filesystem::path& edge_file) {
  std::ofstream nodes(node_file, std::ios::binary);
  if (!nodes) throw std::runtime_error("cannot write " + node_file.string());
  for (NodeId v = 0; v < g.node_count(); ++v) {
    nodes << g.key(v) << '\t' << to_string(g.type(v)) << '\t' << g.name(v)
          << '\n';
  }
  std::ofstream edges(edge_file, std::ios::binary);
  if (!edges) throw std::runtime_error("cannot write " + edge_file.string());
  for (ArcId a = 0; a < g.arc_count(); ++a) {
    const Arc& arc = g.arc(a);
    if (arc.src < arc.dst) {
      edges << g.key(arc.src) << '\t' << g.relation(a) << '\t' << g.key(arc.dst)
            << '\n';
    }
  }
  if (!nodes || !edges) throw std::runtime_error("write failed");
}

void validate_export(const KnowledgeGraph& g, const SubgraphExport& s) {
  std::set<NodeId> nodes(s.nodes.begin(), s.nodes.end());
  for (NodeId v : nodes) {
    if (v < 0 || v >= g.node_count()) {
      throw std::invalid_argument("export node " + std::to_string(v) +
                                  " not in graph");
    }
  }
  for (ArcId a : s.arcs) {
    if (a < 0 || a >= g.arc_count()) {
      throw std::invalid_argument("export arc " + std::to_string(a) +
                                  " not in graph");
    }
    const Arc& arc = g.arc(a);
    if (!nodes.contains(arc.src) || !nodes.contains(arc.dst)) {
      throw std::invalid_argument("export arc " + std::to_string(a) +
                                  " has an endpoint outside the node set");
    }
  }
}

namespace {

std::string dot_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

std::string_view dot_shape(NodeType t) {
  switch (t) {
    case NodeType::Phenotype: return "ellipse";
    case NodeType::Gene: return "box";
    case NodeType::Disease: return "diamond";
    case NodeType::Other: return "circle";
  }
  return "circle";
}

std::string_view dot_color(NodeType t) {
  switch (t) {
    case NodeType::Phenotype: return "orange";
    case NodeType::Gene: return "steelblue";
    case NodeType::Disease: return "firebrick";
    case NodeType::Other: return "gray";
  }
  return "gray";
}

}  // namespace

std::string to_dot(const KnowledgeGraph& g, const SubgraphExport& s,
                   std::string_view graph_name) {
  validate_export(g, s);
  std::ostringstream out;
  out << "graph \"" << dot_escape(graph_name) << "\" {\n";
  std::set<NodeId> nodes(s.nodes.begin(), s.nodes.end());
  for (NodeId v : nodes) {
    const std::string& label = g.name(v).empty() ? g.key(v) : g.name(v);
    out << "  n" << v << " [label=\"" << dot_escape(label);
    if (auto it = s.node_annotations.find(v); it != s.node_annotations.end()) {
      out << "\\n" << dot_escape(it->second);
    }
    out << "\", shape=" << dot_shape(g.type(v)) << ", color="
        << dot_color(g.type(v)) << "];\n";
  }
  std::set<std::pair<NodeId, NodeId>> edges;
  for (ArcId a : s.arcs) {
    const Arc& arc = g.arc(a);
    edges.emplace(std::min(arc.src, arc.dst), std::max(arc.src, arc.dst));
  }
  for (const auto& [u, v] : edges) out << "  n" << u << " -- n" << v << ";\n";
  out << "}\n";
  return out.str();
}

void export_dot(const KnowledgeGraph& g, const SubgraphExport& s,
                const std::filesystem::path& out) {
  const std::string text = to_dot(g, s);
  std::ofstream file(out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + out.string());
  file << text;
  if (!file) throw std::runtime_error("write failed: " + out.string());
}

}  // namespace rarenet
