#pragma once

#include "rarenet/autodiff.hpp"
#include "rarenet/kg_store.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace rarenet {

struct ScoredGene {
  NodeId gene;
  double score;
  bool operator==(const ScoredGene&) const = default;
};

/// Descending score, ties by ascending node id.
bool ranks_before(const ScoredGene& a, const ScoredGene& b);

enum class TieMode {
  ById,       // fixed order: ties broken by ascending node id
  WorstCase,  // the queried gene is placed last within its tie group
};

class Ranking {
 public:
  Ranking() = default;
  /// Takes genes already in ranked order; throws on duplicates.
  explicit Ranking(std::vector<ScoredGene> ordered);

  const std::vector<ScoredGene>& entries() const { return entries_; }
  Index size() const { return static_cast<Index>(entries_.size()); }
  /// 1-based rank, nullopt when the gene is not ranked.
  std::optional<Index> rank_of(NodeId gene, TieMode mode = TieMode::ById) const;

 private:
  std::vector<ScoredGene> entries_;
  std::unordered_map<NodeId, Index> position_;
};

Ranking rank_genes(const std::map<NodeId, double>& gene_scores);

/// Percentage of patients whose truth has rank <= k; absent truths miss.
double hits_at_k(std::span<const Ranking> rankings,
                 std::span<const std::optional<NodeId>> truths, Index k,
                 TieMode mode = TieMode::ById);

/// 100 * mean reciprocal rank, absent truths contribute 0.
double mrr(std::span<const Ranking> rankings,
           std::span<const std::optional<NodeId>> truths,
           TieMode mode = TieMode::ById);

/// Percentage of patients whose truth is in their extracted node set.
double inclusion_rate(std::span<const std::set<NodeId>> extracted,
                      std::span<const std::optional<NodeId>> truths);

struct MetricReport {
  std::map<Index, double> hits_at;
  std::optional<double> mrr;
  std::optional<double> inclusion_rate;
  Index n_patients = 0;
};

MetricReport ranking_report(std::span<const Ranking> rankings,
                            std::span<const std::optional<NodeId>> truths,
                            std::span<const Index> ks,
                            TieMode mode = TieMode::ById);

/// Percentages with one decimal.
std::string report_json(const MetricReport& r);
std::string report_table(const MetricReport& r);

}  // namespace rarenet
