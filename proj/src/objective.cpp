#include "rarenet/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace rarenet {

void LossConfig::validate() const {
  if (!(margin > 0.0)) throw std::invalid_argument("margin must be > 0");
  if (!(gene_alpha > 0.0) || !(gene_beta > 0.0)) {
    throw std::invalid_argument("gene alpha and beta must be > 0");
  }
  if (!(sparsity_threshold > 0.0 && sparsity_threshold < 1.0)) {
    throw std::invalid_argument("sparsity_threshold must lie in (0, 1)");
  }
  if (l1_weight < 0.0 || l2_weight < 0.0 || sparsity_weight < 0.0 ||
      gene_weight < 0.0) {
    throw std::invalid_argument("loss weights must be >= 0");
  }
  if (max_margin_pairs < 0) {
    throw std::invalid_argument("max_margin_pairs must be >= 0");
  }
}

Var subgraph_loss(Var edge_scores, const SupervisionLabels& labels,
                  const LossConfig& cfg, SubgraphLossInfo* info) {
  Tape& tape = *edge_scores.tape();
  if (edge_scores.cols() != 1) {
    throw ShapeError("subgraph_loss: expected a column of arc scores, got " +
                     shape_string(edge_scores.rows(), edge_scores.cols()));
  }
  const Index arcs = edge_scores.rows();
  const auto n_pos = static_cast<Index>(labels.positive_arcs.size());
  const auto n_neg = static_cast<Index>(labels.negative_arcs.size());
  const bool skip = n_pos == 0 || n_neg == 0;
  if (info) info->margin_skipped = skip;
  if (arcs == 0) return tape.constant(Matrix::Zero(1, 1));

  Var loss = tape.constant(Matrix::Zero(1, 1));
  if (!skip) {
    const Index total = n_pos * n_neg;
    if (cfg.max_margin_pairs > 0 && total > cfg.max_margin_pairs) {
      // Evenly strided subset of the row-major pair grid.
      std::vector<Index> pos_rows, neg_rows;
      for (Index j = 0; j < cfg.max_margin_pairs; ++j) {
        const Index pair = j * total / cfg.max_margin_pairs;
        pos_rows.push_back(labels.positive_arcs[pair / n_neg]);
        neg_rows.push_back(labels.negative_arcs[pair % n_neg]);
      }
      Var diff = gather_rows(edge_scores, pos_rows) - gather_rows(edge_scores, neg_rows);
      loss = mean(relu(add_scalar(-diff, cfg.margin)));
    } else {
      std::vector<Index> pos(labels.positive_arcs.begin(), labels.positive_arcs.end());
      std::vector<Index> neg(labels.negative_arcs.begin(), labels.negative_arcs.end());
      Var diff = gather_rows(edge_scores, pos) - transpose(gather_rows(edge_scores, neg));
      loss = mean(relu(add_scalar(-diff, cfg.margin)));
    }
  }
  loss = loss + scale(sum(abs(edge_scores)), cfg.l1_weight);
  loss = loss + scale(dot(edge_scores, edge_scores), cfg.l2_weight);
  Var excess = relu(add_scalar(sigmoid(edge_scores), -cfg.sparsity_threshold));
  return loss + scale(mean(excess), cfg.sparsity_weight);
}

Var gene_loss(Var gene_scores, std::optional<Index> true_gene,
              const LossConfig& cfg, Index* hard_negatives) {
  Tape& tape = *gene_scores.tape();
  const Matrix& s = gene_scores.value();
  if (s.cols() != 1 || s.rows() == 0) {
    throw ShapeError("gene_loss: expected a non-empty column, got " +
                     shape_string(s.rows(), s.cols()));
  }
  if (true_gene && (*true_gene < 0 || *true_gene >= s.rows())) {
    throw std::out_of_range("gene_loss: true gene row out of range");
  }

  std::vector<Index> hn;
  for (Index n = 0; n < s.rows(); ++n) {
    if (true_gene && n == *true_gene) continue;
    if (s(n, 0) > cfg.gene_threshold) hn.push_back(n);
  }
  if (hard_negatives) *hard_negatives = static_cast<Index>(hn.size());

  Var loss = tape.constant(Matrix::Zero(1, 1));
  if (true_gene) {
    const std::vector<Index> row{*true_gene};
    Var margin = add_scalar(gather_rows(gene_scores, row), -cfg.gene_threshold);
    loss = scale(softplus(scale(margin, -cfg.gene_alpha)), 1.0 / cfg.gene_alpha);
  }
  if (!hn.empty()) {
    Var shifted = scale(add_scalar(gather_rows(gene_scores, hn), -cfg.gene_threshold),
                        cfg.gene_beta);
    // log(1 + sum exp(x)) == logsumexp([0, x...])
    Var terms = concat_cols({tape.constant(Matrix::Zero(1, 1)), transpose(shifted)});
    loss = loss + scale(logsumexp(terms), 1.0 / cfg.gene_beta);
  }
  return loss;
}

Var total_loss(Var loss_sub, Var loss_gene, const LossConfig& cfg) {
  if (!std::isfinite(loss_sub.scalar()) || !std::isfinite(loss_gene.scalar())) {
    throw std::domain_error("total_loss: non-finite loss term");
  }
  return loss_sub + scale(loss_gene, cfg.gene_weight);
}

LossReport total_loss(double loss_sub, double loss_gene, const LossConfig& cfg) {
  if (!std::isfinite(loss_sub) || !std::isfinite(loss_gene)) {
    throw std::domain_error("total_loss: non-finite loss term");
  }
  LossReport r;
  r.loss_sub = loss_sub;
  r.loss_gene = loss_gene;
  r.loss_total = loss_sub + cfg.gene_weight * loss_gene;
  return r;
}

}  // namespace rarenet
