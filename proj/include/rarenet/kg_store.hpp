#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rarenet {

using NodeId = std::int64_t;
using ArcId = std::int64_t;

enum class NodeType { Phenotype, Gene, Disease, Other };

std::string_view to_string(NodeType type);
/// Parses the lowercase file token (phenotype, gene, disease, other).
std::optional<NodeType> parse_node_type(std::string_view token);

/// Malformed graph or cohort input. `line()` is 1-based, 0 when not tied to
/// a line.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& file, std::size_t line,
              const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Arc {
  NodeId src;
  NodeId dst;
};

struct Neighbor {
  ArcId arc;
  NodeId dst;
  bool operator==(const Neighbor&) const = default;
};

/// Immutable typed graph. Every undirected edge {u, v} is stored as arcs
/// (u, v) and (v, u); arcs are sorted by (src, dst) so arc ids double as CSR
/// positions.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  std::int64_t node_count() const {
    return static_cast<std::int64_t>(types_.size());
  }
  std::int64_t arc_count() const { return static_cast<std::int64_t>(arcs_.size()); }

  NodeType type(NodeId v) const { return types_.at(check(v)); }
  const std::string& key(NodeId v) const { return keys_.at(check(v)); }
  const std::string& name(NodeId v) const { return names_.at(check(v)); }
  std::optional<NodeId> find(std::string_view key) const;

  const Arc& arc(ArcId a) const { return arcs_.at(static_cast<std::size_t>(a)); }
  const std::string& relation(ArcId a) const;
  /// Arc id of (dst, src).
  ArcId reverse(ArcId a) const;
  std::span<const Arc> arcs() const { return arcs_; }

  /// [first, last) arc ids whose source is v.
  std::pair<ArcId, ArcId> arc_range(NodeId v) const;
  /// Arcs leaving v, ascending destination.
  std::vector<Neighbor> neighbors(NodeId v) const;
  std::optional<ArcId> find_arc(NodeId src, NodeId dst) const;

 private:
  friend class GraphBuilder;
  std::size_t check(NodeId v) const;

  std::vector<NodeType> types_;
  std::vector<std::string> keys_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
  std::vector<Arc> arcs_;
  std::vector<ArcId> offsets_;
  std::vector<std::uint32_t> relation_of_arc_;
  std::vector<std::string> relations_;
};

/// Accumulates nodes and undirected edges, then freezes them into a
/// KnowledgeGraph. Node ids follow insertion order.
class GraphBuilder {
 public:
  NodeId add_node(std::string key, NodeType type, std::string name);
  /// Returns false when {u, v} already exists (first relation wins).
  /// Throws on self-edges.
  bool add_edge(NodeId u, NodeId v, std::string_view relation);
  bool has_edge(NodeId u, NodeId v) const;
  std::optional<NodeId> find(std::string_view key) const;
  std::int64_t node_count() const {
    return static_cast<std::int64_t>(types_.size());
  }
  KnowledgeGraph build() &&;

 private:
  std::vector<NodeType> types_;
  std::vector<std::string> keys_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
  // Undirected edges in insertion order, stored with u < v.
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::uint32_t> edge_relation_;
  std::map<std::pair<NodeId, NodeId>, std::size_t> edge_index_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::uint32_t> relation_index_;
};

/// Loads the node and edge TSV files.
KnowledgeGraph load_graph(const std::filesystem::path& node_file,
                          const std::filesystem::path& edge_file);

/// Writes the graph back in the load format, one edge line per arc pair
/// (ascending src, dst with src < dst).
void write_graph(const KnowledgeGraph& g, const std::filesystem::path& node_file,
                 const std::filesystem::path& edge_file);

struct SubgraphExport {
  std::vector<NodeId> nodes;
  std::vector<ArcId> arcs;
  std::map<NodeId, std::string> node_annotations;
};

/// Throws std::invalid_argument when an arc endpoint is missing from nodes.
void validate_export(const KnowledgeGraph& g, const SubgraphExport& s);

/// DOT document text: node shape/colour by type, annotations appended to
/// labels, one undirected edge per arc pair.
std::string to_dot(const KnowledgeGraph& g, const SubgraphExport& s,
                   std::string_view graph_name = "patient");
void export_dot(const KnowledgeGraph& g, const SubgraphExport& s,
                const std::filesystem::path& out);

}  // namespace rarenet
