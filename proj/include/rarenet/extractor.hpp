#pragma once

#include "rarenet/eval.hpp"
#include "rarenet/kg_store.hpp"
#include "rarenet/model.hpp"
#include "rarenet/sampler.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace rarenet {

struct ExtractionConfig {
  int hops = 2;
  int edge_top_k = 5;
  int gene_top_k = 2;
  double edge_percentile = 80.0;
  double gene_threshold = 0.5;

  /// penalty_weight bounds the admissible gene threshold to [-1 - lambda, 1].
  void validate(double penalty_weight) const;
};

struct PatientGraph {
  /// All collected nodes, ascending.
  std::vector<NodeId> nodes;
  /// frontier_by_hop[h] is the (ascending) frontier after hop h; [0] holds
  /// the active phenotypes.
  std::vector<std::vector<NodeId>> frontier_by_hop;
  /// Genes admitted by the final hop, ascending.
  std::vector<NodeId> selected_genes;
};

/// Linear-interpolated percentile (0 < percentile < 100).
double compute_edge_threshold(std::span<const double> edge_scores,
                              double percentile);

/// Thresholded top-k expansion from the active phenotypes. `gene_scores` is
/// aligned with sg.gene_locals. Hops 1..m-1 follow arcs scoring at least
/// `edge_threshold`, keeping the best `edge_top_k` per node; the final hop
/// admits only genes that also pass `gene_threshold`, keeping `gene_top_k`.
/// Ties go to the lower destination id.
PatientGraph extract_patient_graph(const SampledSubgraph& sg,
                                   std::span<const double> edge_scores,
                                   std::span<const double> gene_scores,
                                   double edge_threshold,
                                   const ExtractionConfig& cfg);

/// Same, with the edge threshold taken at cfg.edge_percentile of this
/// patient's arc scores.
PatientGraph extract_patient_graph(const SampledSubgraph& sg,
                                   const ScoreBundle& scores,
                                   const ExtractionConfig& cfg);

/// Gene-typed members of the collected node set.
std::vector<NodeId> genes_in(const PatientGraph& pg, const KnowledgeGraph& g);

/// (x - min) / (max - min); a constant map becomes all 0.5.
std::map<NodeId, double> min_max_normalize(const std::map<NodeId, double>& raw);

/// Adds `boost` to every gene in `boosted` and re-ranks. Boosted genes that
/// are missing from `normalized` enter with score 0 and are reported through
/// `missing`.
std::vector<ScoredGene> fuse_scores(const std::map<NodeId, double>& normalized,
                                    std::span<const NodeId> boosted, double boost,
                                    std::vector<NodeId>* missing = nullptr);

/// Collected nodes plus the subgraph arcs between them; genes are annotated
/// with their score when `scores` is given.
SubgraphExport to_export(const PatientGraph& pg, const SampledSubgraph& sg,
                         const ScoreBundle* scores = nullptr);

/// {"id", "nodes", "genes", "selected_genes", "frontiers"} with node keys.
std::string patient_graph_json(const std::string& patient_id,
                               const PatientGraph& pg, const KnowledgeGraph& g);

}  // namespace rarenet
