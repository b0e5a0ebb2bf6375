#pragma once

#include "rarenet/autodiff.hpp"
#include "rarenet/sampler.hpp"

#include <optional>

namespace rarenet {

struct LossConfig {
  double margin = 0.5;
  double l1_weight = 0.15;
  double l2_weight = 0.15;
  double sparsity_weight = 0.25;
  double sparsity_threshold = 0.5;
  double gene_alpha = 2.0;
  double gene_beta = 40.0;
  double gene_threshold = 0.5;
  double gene_weight = 1.0;
  /// Upper bound on margin pairs; 0 uses the full positive x negative product.
  Index max_margin_pairs = 0;

  void validate() const;
};

struct LossReport {
  double loss_sub = 0.0;
  double loss_gene = 0.0;
  double loss_total = 0.0;
  Index hard_negative_count = 0;
};

struct SubgraphLossInfo {
  /// No positive or no negative arcs: only the regularisers contributed.
  bool margin_skipped = false;
};

/// Pairwise margin ranking of positive over negative arcs plus L1, squared L2
/// and sparsity regularisers over every arc score.
Var subgraph_loss(Var edge_scores, const SupervisionLabels& labels,
                  const LossConfig& cfg, SubgraphLossInfo* info = nullptr);

/// Soft ranking loss of the causal gene (row `true_gene`) against hard
/// negatives, i.e. other genes scoring above the threshold. Without a causal
/// gene only the hard-negative term remains, taken over all genes.
Var gene_loss(Var gene_scores, std::optional<Index> true_gene,
              const LossConfig& cfg, Index* hard_negatives = nullptr);

/// loss_sub + gene_weight * loss_gene. Throws std::domain_error on
/// non-finite inputs.
Var total_loss(Var loss_sub, Var loss_gene, const LossConfig& cfg);
LossReport total_loss(double loss_sub, double loss_gene, const LossConfig& cfg);

}  // namespace rarenet
