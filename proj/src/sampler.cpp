#include "rarenet/sampler.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace rarenet {

std::optional<LocalIndex> SampledSubgraph::local_of(NodeId global) const {
  auto it = std::lower_bound(local_nodes.begin(), local_nodes.end(), global);
  if (it == local_nodes.end() || *it != global) return std::nullopt;
  return static_cast<LocalIndex>(it - local_nodes.begin());
}

SampledSubgraph sample_phenotype_subgraph(const KnowledgeGraph& g,
                                          std::span<const NodeId> phenotypes,
                                          int m) {
  if (m < 1) throw std::invalid_argument("hop count must be at least 1");
  SampledSubgraph sg;

  std::vector<NodeId> sources;
  for (NodeId p : phenotypes) {
    if (p < 0 || p >= g.node_count()) {
      sg.skipped_phenotypes.push_back(p);
      continue;
    }
    if (g.type(p) != NodeType::Phenotype) {
      throw std::invalid_argument("node '" + g.key(p) + "' is a " +
                                  std::string(to_string(g.type(p))) +
                                  ", not a phenotype");
    }
    sources.push_back(p);
  }
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  if (sources.empty()) {
    throw std::invalid_argument("no phenotype of the patient is in the graph");
  }

  std::vector<int> dist(static_cast<std::size_t>(g.node_count()), -1);
  std::vector<NodeId> reached;
  std::deque<NodeId> queue;
  for (NodeId p : sources) {
    dist[p] = 0;
    reached.push_back(p);
    queue.push_back(p);
  }
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    if (dist[v] == m) continue;
    const auto [first, last] = g.arc_range(v);
    for (ArcId a = first; a < last; ++a) {
      const NodeId u = g.arc(a).dst;
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        reached.push_back(u);
        queue.push_back(u);
      }
    }
  }

  std::sort(reached.begin(), reached.end());
  sg.local_nodes = reached;
  const auto n = static_cast<std::size_t>(sg.node_count());
  sg.hop_of_node.resize(n);
  std::vector<LocalIndex> local(static_cast<std::size_t>(g.node_count()), -1);
  for (std::size_t i = 0; i < n; ++i) {
    local[sg.local_nodes[i]] = static_cast<LocalIndex>(i);
    sg.hop_of_node[i] = dist[sg.local_nodes[i]];
  }

  sg.arc_offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [first, last] = g.arc_range(sg.local_nodes[i]);
    for (ArcId a = first; a < last; ++a) {
      const LocalIndex dst = local[g.arc(a).dst];
      if (dst >= 0) sg.local_arcs.push_back({static_cast<LocalIndex>(i), dst, a});
    }
    sg.arc_offsets[i + 1] = sg.arc_count();
  }

  sg.reverse_arc.resize(sg.local_arcs.size());
  for (std::size_t e = 0; e < sg.local_arcs.size(); ++e) {
    const LocalArc& arc = sg.local_arcs[e];
    auto begin = sg.local_arcs.begin() + sg.arc_offsets[arc.dst];
    auto end = sg.local_arcs.begin() + sg.arc_offsets[arc.dst + 1];
    auto it = std::lower_bound(
        begin, end, arc.src,
        [](const LocalArc& x, LocalIndex d) { return x.dst < d; });
    sg.reverse_arc[e] = static_cast<LocalIndex>(it - sg.local_arcs.begin());
  }

  for (NodeId p : sources) sg.phenotype_locals.push_back(local[p]);
  for (std::size_t i = 0; i < n; ++i) {
    if (g.type(sg.local_nodes[i]) == NodeType::Gene) {
      sg.gene_locals.push_back(static_cast<LocalIndex>(i));
    }
  }
  return sg;
}

namespace {

std::vector<int> local_bfs(const SampledSubgraph& sg, LocalIndex source) {
  std::vector<int> dist(static_cast<std::size_t>(sg.node_count()), -1);
  std::deque<LocalIndex> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const LocalIndex v = queue.front();
    queue.pop_front();
    for (LocalIndex e = sg.arc_offsets[v]; e < sg.arc_offsets[v + 1]; ++e) {
      const LocalIndex u = sg.local_arcs[e].dst;
      if (dist[u] < 0) {
        dist[u] = dist[v] + 1;
        queue.push_back(u);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<LocalIndex> positive_arcs(const SampledSubgraph& sg,
                                      NodeId causal_gene) {
  const auto target = sg.local_of(causal_gene);
  if (!target) return {};
  const std::vector<int> to_gene = local_bfs(sg, *target);
  std::vector<char> positive(sg.local_arcs.size(), 0);
  for (LocalIndex p : sg.phenotype_locals) {
    const std::vector<int> from_p = local_bfs(sg, p);
    const int length = from_p[*target];
    if (length < 0) continue;
    for (std::size_t e = 0; e < sg.local_arcs.size(); ++e) {
      const LocalArc& arc = sg.local_arcs[e];
      if (from_p[arc.src] >= 0 && to_gene[arc.dst] >= 0 &&
          from_p[arc.src] + 1 + to_gene[arc.dst] == length) {
        positive[e] = 1;
        positive[sg.reverse_arc[e]] = 1;
      }
    }
  }
  std::vector<LocalIndex> out;
  for (std::size_t e = 0; e < positive.size(); ++e) {
    if (positive[e]) out.push_back(static_cast<LocalIndex>(e));
  }
  return out;
}

std::vector<LocalIndex> sample_negative_arcs(const SampledSubgraph& sg,
                                             std::span<const LocalIndex> positives,
                                             int k, Rng& rng) {
  if (k < 0) throw std::invalid_argument("negative ratio must be >= 0");
  std::vector<char> taken(sg.local_arcs.size(), 0);
  for (LocalIndex e : positives) taken.at(static_cast<std::size_t>(e)) = 1;
  std::vector<LocalIndex> remaining;
  for (std::size_t e = 0; e < taken.size(); ++e) {
    if (!taken[e]) remaining.push_back(static_cast<LocalIndex>(e));
  }
  const std::size_t want = std::min(
      static_cast<std::size_t>(k) * positives.size(), remaining.size());
  std::vector<LocalIndex> out;
  out.reserve(want);
  for (std::size_t i : sample_without_replacement(rng, remaining.size(), want)) {
    out.push_back(remaining[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

SupervisionLabels label_supervision_edges(const SampledSubgraph& sg,
                                          NodeId causal_gene, int k, Rng& rng) {
  SupervisionLabels labels;
  if (!sg.local_of(causal_gene)) {
    labels.causal_gene_missing = true;
    return labels;
  }
  labels.positive_arcs = positive_arcs(sg, causal_gene);
  labels.negative_arcs = sample_negative_arcs(sg, labels.positive_arcs, k, rng);
  return labels;
}

std::vector<LocalIndex> candidate_genes(const SampledSubgraph& sg) {
  return sg.gene_locals;
}

}  // namespace rarenet
