#include "rarenet/extractor.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace rarenet {

void ExtractionConfig::validate(double penalty_weight) const {
  if (hops < 1) throw std::invalid_argument("extraction hops must be >= 1");
  if (edge_top_k < 1 || gene_top_k < 1) {
    throw std::invalid_argument("top-k limits must be >= 1");
  }
  if (!(edge_percentile > 0.0 && edge_percentile < 100.0)) {
    throw std::invalid_argument("edge percentile must lie in (0, 100)");
  }
  if (!(gene_threshold >= -1.0 - penalty_weight && gene_threshold <= 1.0)) {
    throw std::invalid_argument("gene threshold outside [-1 - lambda, 1]");
  }
}

double compute_edge_threshold(std::span<const double> edge_scores,
                              double percentile) {
  if (edge_scores.empty()) {
    throw std::invalid_argument("edge threshold of an empty score vector");
  }
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("percentile outside [0, 100]");
  }
  std::vector<double> sorted(edge_scores.begin(), edge_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = percentile / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

struct Candidate {
  double score;
  LocalIndex dst;
};

// Best `limit` candidates: descending score, then ascending destination
// (local order follows global id order).
void keep_top(std::vector<Candidate>& c, int limit) {
  std::sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.dst < b.dst;
  });
  if (c.size() > static_cast<std::size_t>(limit)) c.resize(static_cast<std::size_t>(limit));
}

std::vector<NodeId> to_global(const std::set<LocalIndex>& locals,
                              const SampledSubgraph& sg) {
  std::vector<NodeId> out;
  out.reserve(locals.size());
  for (LocalIndex v : locals) out.push_back(sg.local_nodes[v]);
  return out;
}

}  // namespace

PatientGraph extract_patient_graph(const SampledSubgraph& sg,
                                   std::span<const double> edge_scores,
                                   std::span<const double> gene_scores,
                                   double edge_threshold,
                                   const ExtractionConfig& cfg) {
  if (static_cast<LocalIndex>(edge_scores.size()) != sg.arc_count()) {
    throw std::invalid_argument("edge scores do not match the subgraph arcs");
  }
  if (gene_scores.size() != sg.gene_locals.size()) {
    throw std::invalid_argument("gene scores do not match the subgraph genes");
  }
  if (cfg.hops < 1) throw std::invalid_argument("extraction hops must be >= 1");

  std::vector<double> gene_score_of(static_cast<std::size_t>(sg.node_count()),
                                    std::nan(""));
  std::vector<char> is_gene(static_cast<std::size_t>(sg.node_count()), 0);
  for (std::size_t i = 0; i < sg.gene_locals.size(); ++i) {
    is_gene[sg.gene_locals[i]] = 1;
    gene_score_of[sg.gene_locals[i]] = gene_scores[i];
  }

  std::set<LocalIndex> collected(sg.phenotype_locals.begin(), sg.phenotype_locals.end());
  std::set<LocalIndex> frontier = collected;
  PatientGraph pg;
  pg.frontier_by_hop.push_back(to_global(frontier, sg));

  for (int h = 1; h < cfg.hops; ++h) {
    std::set<LocalIndex> next;
    for (LocalIndex v : frontier) {
      std::vector<Candidate> picked;
      for (LocalIndex e = sg.arc_offsets[v]; e < sg.arc_offsets[v + 1]; ++e) {
        if (edge_scores[e] >= edge_threshold) {
          picked.push_back({edge_scores[e], sg.local_arcs[e].dst});
        }
      }
      keep_top(picked, cfg.edge_top_k);
      for (const Candidate& c : picked) next.insert(c.dst);
    }
    collected.insert(next.begin(), next.end());
    pg.frontier_by_hop.push_back(to_global(next, sg));
    frontier = std::move(next);
  }

  std::set<LocalIndex> genes;
  for (LocalIndex w : frontier) {
    std::vector<Candidate> picked;
    for (LocalIndex e = sg.arc_offsets[w]; e < sg.arc_offsets[w + 1]; ++e) {
      const LocalIndex g = sg.local_arcs[e].dst;
      if (is_gene[g] && edge_scores[e] >= edge_threshold &&
          gene_score_of[g] >= cfg.gene_threshold) {
        picked.push_back({edge_scores[e], g});
      }
    }
    keep_top(picked, cfg.gene_top_k);
    for (const Candidate& c : picked) genes.insert(c.dst);
  }
  collected.insert(genes.begin(), genes.end());
  pg.frontier_by_hop.push_back(to_global(genes, sg));
  pg.selected_genes = to_global(genes, sg);
  pg.nodes = to_global(collected, sg);
  return pg;
}

PatientGraph extract_patient_graph(const SampledSubgraph& sg,
                                   const ScoreBundle& scores,
                                   const ExtractionConfig& cfg) {
  if (scores.edge_scores.empty()) {
    return extract_patient_graph(sg, scores.edge_scores, scores.gene_scores, 0.0, cfg);
  }
  const double tau = compute_edge_threshold(scores.edge_scores, cfg.edge_percentile);
  return extract_patient_graph(sg, scores.edge_scores, scores.gene_scores, tau, cfg);
}

std::vector<NodeId> genes_in(const PatientGraph& pg, const KnowledgeGraph& g) {
  std::vector<NodeId> out;
  for (NodeId v : pg.nodes) {
    if (g.type(v) == NodeType::Gene) out.push_back(v);
  }
  return out;
}

std::map<NodeId, double> min_max_normalize(const std::map<NodeId, double>& raw) {
  if (raw.empty()) throw std::invalid_argument("min_max_normalize: empty map");
  double lo = raw.begin()->second;
  double hi = lo;
  for (const auto& [g, s] : raw) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  std::map<NodeId, double> out;
  for (const auto& [g, s] : raw) {
    out[g] = hi > lo ? (s - lo) / (hi - lo) : 0.5;
  }
  return out;
}

std::vector<ScoredGene> fuse_scores(const std::map<NodeId, double>& normalized,
                                    std::span<const NodeId> boosted, double boost,
                                    std::vector<NodeId>* missing) {
  if (!(boost >= 0.0)) throw std::invalid_argument("boost must be >= 0");
  std::map<NodeId, double> fused = normalized;
  const std::set<NodeId> unique(boosted.begin(), boosted.end());
  for (NodeId g : unique) {
    auto it = fused.find(g);
    if (it == fused.end()) {
      if (missing) missing->push_back(g);
      it = fused.emplace(g, 0.0).first;
    }
    it->second += boost;
  }
  std::vector<ScoredGene> out;
  out.reserve(fused.size());
  for (const auto& [g, s] : fused) out.push_back({g, s});
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

SubgraphExport to_export(const PatientGraph& pg, const SampledSubgraph& sg,
                         const ScoreBundle* scores) {
  SubgraphExport out;
  out.nodes = pg.nodes;
  std::set<NodeId> in(pg.nodes.begin(), pg.nodes.end());
  for (const LocalArc& a : sg.local_arcs) {
    if (in.contains(sg.local_nodes[a.src]) && in.contains(sg.local_nodes[a.dst])) {
      out.arcs.push_back(a.global);
    }
  }
  if (scores) {
    for (std::size_t i = 0; i < sg.gene_locals.size(); ++i) {
      const NodeId g = sg.local_nodes[sg.gene_locals[i]];
      if (in.contains(g)) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s=%.3f", scores->gene_scores[i]);
        out.node_annotations[g] = buf;
      }
    }
  }
  return out;
}

std::string patient_graph_json(const std::string& patient_id,
                               const PatientGraph& pg, const KnowledgeGraph& g) {
  auto keys = [&](const std::vector<NodeId>& ids) {
    auto a = nlohmann::ordered_json::array();
    for (NodeId v : ids) a.push_back(g.key(v));
    return a;
  };
  nlohmann::ordered_json j;
  j["id"] = patient_id;
  j["nodes"] = keys(pg.nodes);
  j["genes"] = keys(genes_in(pg, g));
  j["selected_genes"] = keys(pg.selected_genes);
  auto frontiers = nlohmann::ordered_json::array();
  for (const auto& f : pg.frontier_by_hop) frontiers.push_back(keys(f));
  j["frontiers"] = std::move(frontiers);
  return j.dump();
}

}  // namespace rarenet
