#include "doctest.h"
#include "helpers.hpp"

#include "rarenet/model.hpp"
#include "rarenet/objective.hpp"

#include <cmath>

using namespace rarenet;
using testing::random_matrix;

namespace {

LossConfig margin_only() {
  LossConfig c;
  c.l1_weight = c.l2_weight = c.sparsity_weight = 0.0;
  return c;
}

double sub_oracle(const Matrix& e, const SupervisionLabels& l, const LossConfig& c) {
  double margin = 0.0;
  for (LocalIndex i : l.positive_arcs)
    for (LocalIndex j : l.negative_arcs)
      margin += std::max(0.0, c.margin - (e(i, 0) - e(j, 0)));
  if (!l.positive_arcs.empty() && !l.negative_arcs.empty()) {
    margin /= static_cast<double>(l.positive_arcs.size() * l.negative_arcs.size());
  }
  double l1 = 0.0, l2 = 0.0, sp = 0.0;
  for (Index i = 0; i < e.rows(); ++i) {
    l1 += std::abs(e(i, 0));
    l2 += e(i, 0) * e(i, 0);
    sp += std::max(0.0, 1.0 / (1.0 + std::exp(-e(i, 0))) - c.sparsity_threshold);
  }
  return margin + c.l1_weight * l1 + c.l2_weight * l2 +
         c.sparsity_weight * sp / static_cast<double>(e.rows());
}

double gene_oracle(const Matrix& s, std::optional<Index> truth, const LossConfig& c) {
  double loss = 0.0;
  if (truth) {
    loss += std::log1p(std::exp(-c.gene_alpha * (s(*truth, 0) - c.gene_threshold))) / c.gene_alpha;
  }
  double acc = 1.0;
  bool any = false;
  for (Index n = 0; n < s.rows(); ++n) {
    if (truth && n == *truth) continue;
    if (s(n, 0) > c.gene_threshold) {
      acc += std::exp(c.gene_beta * (s(n, 0) - c.gene_threshold));
      any = true;
    }
  }
  if (any) loss += std::log(acc) / c.gene_beta;
  return loss;
}

}  // namespace

TEST_CASE("margin term cases") {
  const LossConfig c = margin_only();
  SupervisionLabels l;
  l.positive_arcs = {0};
  l.negative_arcs = {1};
  Tape t;
  Matrix e(2, 1);
  e << 1.0, 0.0;
  CHECK(subgraph_loss(t.constant(e), l, c).scalar() == 0.0);
  e << 0.3, 0.3;
  CHECK(subgraph_loss(t.constant(e), l, c).scalar() == doctest::Approx(c.margin));

  SubgraphLossInfo info;
  SupervisionLabels none;
  CHECK(subgraph_loss(t.constant(e), none, c, &info).scalar() == 0.0);
  CHECK(info.margin_skipped);
}

TEST_CASE("subgraph loss equals the pairwise loop") {
  LossConfig c;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Matrix e = random_matrix(20, 1, rng, -2, 2);
    SupervisionLabels l;
    l.positive_arcs = {1, 4, 7};
    l.negative_arcs = {0, 2, 3, 9, 11, 12, 15, 19};
    Tape t;
    const double got = subgraph_loss(t.constant(e), l, c).scalar();
    CHECK(std::abs(got - sub_oracle(e, l, c)) <= 1e-12);
  }
}

TEST_CASE("max_margin_pairs keeps the full product when it fits") {
  LossConfig c;
  c.max_margin_pairs = 1000;
  Rng rng(2);
  const Matrix e = random_matrix(10, 1, rng);
  SupervisionLabels l;
  l.positive_arcs = {0, 1};
  l.negative_arcs = {2, 3, 4};
  Tape t;
  CHECK(std::abs(subgraph_loss(t.constant(e), l, c).scalar() - sub_oracle(e, l, c)) <= 1e-12);
  c.max_margin_pairs = 6;  // exactly the product: still every pair once
  CHECK(std::abs(subgraph_loss(t.constant(e), l, c).scalar() - sub_oracle(e, l, c)) <= 1e-12);
}

TEST_CASE("gene loss cases") {
  LossConfig c;
  Tape t;
  Matrix s(1, 1);
  s << c.gene_threshold;
  CHECK(gene_loss(t.constant(s), Index{0}, c).scalar() ==
        doctest::Approx(std::log(2.0) / c.gene_alpha).epsilon(1e-15));
  s << 1e6;
  CHECK(gene_loss(t.constant(s), Index{0}, c).scalar() < 1e-12);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Matrix v = random_matrix(8, 1, rng, -1.5, 1.0);
    const Index truth = static_cast<Index>(seed % 8);
    Index hn = -1;
    const double got = gene_loss(t.constant(v), truth, c, &hn).scalar();
    CHECK(std::abs(got - gene_oracle(v, truth, c)) <= 1e-10);
    Index count = 0;
    for (Index n = 0; n < 8; ++n) count += (n != truth && v(n, 0) > c.gene_threshold);
    CHECK(hn == count);
    CHECK(std::abs(gene_loss(t.constant(v), std::nullopt, c).scalar() -
                   gene_oracle(v, std::nullopt, c)) <= 1e-10);
  }
  CHECK_THROWS(gene_loss(t.constant(s), Index{3}, c));
}

TEST_CASE("total loss") {
  LossConfig c;
  CHECK(total_loss(0.0, 0.0, c).loss_total == 0.0);
  CHECK(total_loss(1.0, 2.0, c).loss_total == 3.0);
  CHECK_THROWS_AS(total_loss(std::nan(""), 0.0, c), std::domain_error);
  Tape t;
  CHECK_THROWS_AS(total_loss(t.constant(Matrix::Constant(1, 1, INFINITY)),
                             t.constant(Matrix::Zero(1, 1)), c),
                  std::domain_error);
}

TEST_CASE("loss config validation") {
  LossConfig c;
  c.margin = 0;
  CHECK_THROWS(c.validate());
  c = LossConfig{};
  c.sparsity_threshold = 1.0;
  CHECK_THROWS(c.validate());
  c = LossConfig{};
  c.l1_weight = -0.1;
  CHECK_THROWS(c.validate());
}

TEST_CASE("loss gradients match central differences") {
  const ModelConfig cfg = testing::small_config();
  const KnowledgeGraph g = testing::random_graph(20, 0.2, 12, 3);
  Rng rng(13);
  const ModelParams p = init_params(cfg, g.node_count(), rng);
  std::vector<NodeId> P;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (g.type(v) == NodeType::Phenotype) P.push_back(v);
  }
  const SampledSubgraph sg = sample_phenotype_subgraph(g, P, 2);
  REQUIRE(sg.gene_locals.size() >= 2);
  const NodeId causal = sg.local_nodes[sg.gene_locals[0]];
  Rng neg(1);
  const SupervisionLabels labels = label_supervision_edges(sg, causal, 5, neg);
  LossConfig lc;
  lc.gene_threshold = -0.2;  // make some hard negatives appear

  std::vector<Matrix> all;
  for (const auto& [name, m] : p.tensors()) all.push_back(*m);

  SUBCASE("subgraph loss w.r.t. the edge scorer") {
    // Only the edge MLP is free; everything else is frozen.
    const auto f = [&](Tape& t, std::span<const Var> v) {
      std::vector<Var> vars;
      for (std::size_t i = 0; i < all.size(); ++i) vars.push_back(t.constant(all[i]));
      const std::size_t first = all.size() - 4;
      for (std::size_t i = 0; i < 4; ++i) vars[first + i] = v[i];
      const ParamVars pv = param_vars_from_list(vars, cfg.layers, sg);
      const ForwardResult r = forward(pv, cfg, sg);
      return subgraph_loss(r.edge_scores, labels, lc);
    };
    std::vector<Matrix> mlp(all.end() - 4, all.end());
    const auto rep = grad_check(f, mlp, 1e-5, 40, 3);
    CHECK(rep.max_relative_error <= 1e-4);
  }
  SUBCASE("gene loss w.r.t. the query") {
    const std::size_t qi = all.size() - 6;
    const auto f = [&](Tape& t, std::span<const Var> v) {
      std::vector<Var> vars;
      for (std::size_t i = 0; i < all.size(); ++i) vars.push_back(t.constant(all[i]));
      vars[qi] = v[0];
      const ParamVars pv = param_vars_from_list(vars, cfg.layers, sg);
      const ForwardResult r = forward(pv, cfg, sg);
      return gene_loss(r.gene_scores, Index{0}, lc);
    };
    const auto rep = grad_check(f, std::vector<Matrix>{all[qi]}, 1e-5, 40, 4);
    CHECK(rep.max_relative_error <= 1e-4);
  }
}
