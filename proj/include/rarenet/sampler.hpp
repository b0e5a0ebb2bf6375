#pragma once

#include "rarenet/kg_store.hpp"
#include "rarenet/random.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rarenet {

/// Local (subgraph) index type. Matches Eigen::Index so it can feed the
/// segment and gather ops directly.
using LocalIndex = std::ptrdiff_t;

struct PatientRecord {
  std::string id;
  std::vector<NodeId> phenotypes;
  /// Absent in inference mode or when the label is not a graph node.
  std::optional<NodeId> causal_gene;
  /// Label as written in the cohort file, kept for evaluation.
  std::optional<std::string> causal_gene_key;
};

struct LocalArc {
  LocalIndex src;
  LocalIndex dst;
  ArcId global;
};

/// Phenotype-centred m-hop induced subgraph. Local nodes are ordered by
/// ascending global id; local arcs by (src, dst).
struct SampledSubgraph {
  std::vector<NodeId> local_nodes;
  std::vector<LocalArc> local_arcs;
  /// CSR offsets into local_arcs by local source, size node_count() + 1.
  std::vector<LocalIndex> arc_offsets;
  /// Local index of the arc (dst, src) for every local arc.
  std::vector<LocalIndex> reverse_arc;
  std::vector<LocalIndex> phenotype_locals;
  std::vector<LocalIndex> gene_locals;
  std::vector<int> hop_of_node;
  /// Requested phenotype ids that were not graph nodes.
  std::vector<NodeId> skipped_phenotypes;

  LocalIndex node_count() const {
    return static_cast<LocalIndex>(local_nodes.size());
  }
  LocalIndex arc_count() const {
    return static_cast<LocalIndex>(local_arcs.size());
  }
  std::optional<LocalIndex> local_of(NodeId global) const;
};

struct SupervisionLabels {
  std::vector<LocalIndex> positive_arcs;
  std::vector<LocalIndex> negative_arcs;
  /// Set when the causal gene is not a node of the subgraph.
  bool causal_gene_missing = false;
};

/// Multi-source BFS from every phenotype at once, truncated at depth m, with
/// the induced arc set. Unknown phenotype ids are recorded in
/// skipped_phenotypes; throws when none remain or when a known id is not
/// Phenotype-typed.
SampledSubgraph sample_phenotype_subgraph(const KnowledgeGraph& g,
                                          std::span<const NodeId> phenotypes,
                                          int m);

/// Both directions of every edge lying on a shortest path (inside the
/// subgraph) from any phenotype to the causal gene. Ascending.
std::vector<LocalIndex> positive_arcs(const SampledSubgraph& sg,
                                      NodeId causal_gene);

/// min(k * |positives|, remaining) arcs drawn uniformly without replacement
/// from the arcs not in `positives`. Ascending.
std::vector<LocalIndex> sample_negative_arcs(const SampledSubgraph& sg,
                                             std::span<const LocalIndex> positives,
                                             int k, Rng& rng);

SupervisionLabels label_supervision_edges(const SampledSubgraph& sg,
                                          NodeId causal_gene, int k, Rng& rng);

std::vector<LocalIndex> candidate_genes(const SampledSubgraph& sg);

}  // namespace rarenet
