#include "rarenet/model.hpp"

#include <cmath>
#include <stdexcept>

namespace rarenet {

void ModelConfig::validate() const {
  auto positive = [](Index v, const char* name) {
    if (v <= 0) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(embed_dim, "embed_dim");
  positive(hidden_dim, "hidden_dim");
  positive(out_dim, "out_dim");
  positive(heads, "heads");
  positive(layers, "layers");
  positive(attn_proj_dim, "attn_proj_dim");
  positive(edge_mlp_hidden, "edge_mlp_hidden");
  if (hidden_dim % heads != 0) {
    throw std::invalid_argument("hidden_dim must be divisible by heads");
  }
  if (!(penalty_weight >= 0.0)) {
    throw std::invalid_argument("penalty_weight must be >= 0");
  }
  if (!(leaky_slope >= 0.0)) throw std::invalid_argument("leaky_slope must be >= 0");
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  out.emplace_back("node_embeddings", &node_embeddings);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "gat." + std::to_string(l) + ".";
    out.emplace_back(prefix + "w_src", &layers[l].w_src);
    out.emplace_back(prefix + "w_dst", &layers[l].w_dst);
    out.emplace_back(prefix + "attention", &layers[l].attention);
    out.emplace_back(prefix + "w_proj", &layers[l].w_proj);
  }
  out.emplace_back("query", &query);
  out.emplace_back("attn_projection", &attn_projection);
  out.emplace_back("edge_mlp.w1", &edge_w1);
  out.emplace_back("edge_mlp.b1", &edge_b1);
  out.emplace_back("edge_mlp.w2", &edge_w2);
  out.emplace_back("edge_mlp.b2", &edge_b2);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::tensors() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<ModelParams*>(this)->tensors()) {
    out.emplace_back(name, m);
  }
  return out;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for (auto& [name, m] : z.tensors()) m->setZero();
  return z;
}

namespace {

Matrix glorot(Index rows, Index cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -a, a);
  return m;
}

void expect_shape(const Matrix& m, Index rows, Index cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw std::invalid_argument(name + ": expected " + shape_string(rows, cols) +
                                ", got " + shape_string(m.rows(), m.cols()));
  }
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, Index node_count, Rng& rng) {
  cfg.validate();
  if (node_count <= 0) throw std::invalid_argument("node_count must be positive");
  ModelParams p;
  p.node_embeddings = glorot(node_count, cfg.embed_dim, rng);
  for (Index l = 0; l < cfg.layers; ++l) {
    const Index in = cfg.layer_input_dim(l);
    GatLayerParams layer;
    layer.w_src = glorot(in, cfg.hidden_dim, rng);
    layer.w_dst = glorot(in, cfg.hidden_dim, rng);
    layer.attention = glorot(cfg.head_dim(), cfg.heads, rng);
    layer.w_proj = glorot(cfg.hidden_dim, cfg.layer_output_dim(l), rng);
    p.layers.push_back(std::move(layer));
  }
  p.query.resize(cfg.out_dim, 1);
  for (Index i = 0; i < cfg.out_dim; ++i) p.query(i, 0) = normal(rng, 0.0, 0.1);
  p.attn_projection = glorot(cfg.layers * cfg.heads, cfg.attn_proj_dim, rng);
  p.edge_w1 = glorot(cfg.edge_feature_dim(), cfg.edge_mlp_hidden, rng);
  p.edge_b1 = Matrix::Zero(1, cfg.edge_mlp_hidden);
  p.edge_w2 = glorot(cfg.edge_mlp_hidden, 1, rng);
  p.edge_b2 = Matrix::Zero(1, 1);
  return p;
}

void check_shapes(const ModelParams& p, const ModelConfig& cfg, Index node_count) {
  cfg.validate();
  expect_shape(p.node_embeddings, node_count, cfg.embed_dim, "node_embeddings");
  if (static_cast<Index>(p.layers.size()) != cfg.layers) {
    throw std::invalid_argument("layer count mismatch");
  }
  for (Index l = 0; l < cfg.layers; ++l) {
    const auto& layer = p.layers[static_cast<std::size_t>(l)];
    const std::string prefix = "gat." + std::to_string(l) + ".";
    expect_shape(layer.w_src, cfg.layer_input_dim(l), cfg.hidden_dim, prefix + "w_src");
    expect_shape(layer.w_dst, cfg.layer_input_dim(l), cfg.hidden_dim, prefix + "w_dst");
    expect_shape(layer.attention, cfg.head_dim(), cfg.heads, prefix + "attention");
    expect_shape(layer.w_proj, cfg.hidden_dim, cfg.layer_output_dim(l),
                 prefix + "w_proj");
  }
  expect_shape(p.query, cfg.out_dim, 1, "query");
  expect_shape(p.attn_projection, cfg.layers * cfg.heads, cfg.attn_proj_dim,
               "attn_projection");
  expect_shape(p.edge_w1, cfg.edge_feature_dim(), cfg.edge_mlp_hidden, "edge_mlp.w1");
  expect_shape(p.edge_b1, 1, cfg.edge_mlp_hidden, "edge_mlp.b1");
  expect_shape(p.edge_w2, cfg.edge_mlp_hidden, 1, "edge_mlp.w2");
  expect_shape(p.edge_b2, 1, 1, "edge_mlp.b2");
}

ParamVars attach_params(Tape& tape, const ModelParams& params,
                        const SampledSubgraph& sg, bool trainable) {
  auto put = [&](const Matrix& m) {
    return trainable ? tape.variable(m) : tape.constant(m);
  };
  Matrix local(sg.node_count(), params.node_embeddings.cols());
  for (LocalIndex i = 0; i < sg.node_count(); ++i) {
    local.row(i) = params.node_embeddings.row(sg.local_nodes[i]);
  }
  ParamVars v;
  v.node_embeddings = put(local);
  for (const auto& layer : params.layers) {
    v.layers.push_back({put(layer.w_src), put(layer.w_dst), put(layer.attention),
                        put(layer.w_proj)});
  }
  v.query = put(params.query);
  v.attn_projection = put(params.attn_projection);
  v.edge_w1 = put(params.edge_w1);
  v.edge_b1 = put(params.edge_b1);
  v.edge_w2 = put(params.edge_w2);
  v.edge_b2 = put(params.edge_b2);
  return v;
}

ParamVars param_vars_from_list(std::span<const Var> vars, Index layers,
                               const SampledSubgraph& sg) {
  const auto expected = static_cast<std::size_t>(1 + 4 * layers + 6);
  if (vars.size() != expected) {
    throw std::invalid_argument("param_vars_from_list: expected " +
                                std::to_string(expected) + " tensors");
  }
  std::vector<Index> rows(sg.local_nodes.begin(), sg.local_nodes.end());
  ParamVars v;
  std::size_t i = 0;
  v.node_embeddings = gather_rows(vars[i++], rows);
  for (Index l = 0; l < layers; ++l) {
    GatLayerVars layer;
    layer.w_src = vars[i++];
    layer.w_dst = vars[i++];
    layer.attention = vars[i++];
    layer.w_proj = vars[i++];
    v.layers.push_back(layer);
  }
  v.query = vars[i++];
  v.attn_projection = vars[i++];
  v.edge_w1 = vars[i++];
  v.edge_b1 = vars[i++];
  v.edge_w2 = vars[i++];
  v.edge_b2 = vars[i++];
  return v;
}

void accumulate_gradients(const Tape& tape, const ParamVars& vars,
                          const SampledSubgraph& sg, ModelParams& grads) {
  auto add = [&](Var v, Matrix& into) {
    const Matrix& g = tape.grad(v);
    if (g.size() != 0) into += g;
  };
  const Matrix& ge = tape.grad(vars.node_embeddings);
  if (ge.size() != 0) {
    for (LocalIndex i = 0; i < sg.node_count(); ++i) {
      grads.node_embeddings.row(sg.local_nodes[i]) += ge.row(i);
    }
  }
  for (std::size_t l = 0; l < vars.layers.size(); ++l) {
    add(vars.layers[l].w_src, grads.layers[l].w_src);
    add(vars.layers[l].w_dst, grads.layers[l].w_dst);
    add(vars.layers[l].attention, grads.layers[l].attention);
    add(vars.layers[l].w_proj, grads.layers[l].w_proj);
  }
  add(vars.query, grads.query);
  add(vars.attn_projection, grads.attn_projection);
  add(vars.edge_w1, grads.edge_w1);
  add(vars.edge_b1, grads.edge_b1);
  add(vars.edge_w2, grads.edge_w2);
  add(vars.edge_b2, grads.edge_b2);
}

GatOutput gat_forward(const ParamVars& params, const ModelConfig& cfg,
                      const SampledSubgraph& sg) {
  const LocalIndex n = sg.node_count();
  const LocalIndex e = sg.arc_count();
  if (n == 0) throw std::invalid_argument("gat_forward: empty subgraph");

  // Real arcs first, then one virtual self-loop per node.
  std::vector<Index> src(static_cast<std::size_t>(e + n));
  std::vector<Index> dst(static_cast<std::size_t>(e + n));
  for (LocalIndex a = 0; a < e; ++a) {
    src[a] = sg.local_arcs[a].src;
    dst[a] = sg.local_arcs[a].dst;
  }
  for (LocalIndex i = 0; i < n; ++i) {
    src[e + i] = i;
    dst[e + i] = i;
  }
  std::vector<Index> real_rows(static_cast<std::size_t>(e));
  for (LocalIndex a = 0; a < e; ++a) real_rows[a] = a;

  Var x = params.node_embeddings;
  std::vector<Var> records;
  for (Index l = 0; l < cfg.layers; ++l) {
    const GatLayerVars& layer = params.layers[static_cast<std::size_t>(l)];
    Var sender = gather_rows(matmul(x, layer.w_src), src);
    Var receiver = gather_rows(matmul(x, layer.w_dst), dst);
    Var z = leaky_relu(sender + receiver, cfg.leaky_slope);

    const std::vector<Var> z_heads = split_cols(z, cfg.heads);
    const std::vector<Var> sender_heads = split_cols(sender, cfg.heads);
    std::vector<Var> logits;
    for (Index k = 0; k < cfg.heads; ++k) {
      logits.push_back(matmul(z_heads[k], slice_cols(layer.attention, k, 1)));
    }
    Var alpha = segment_softmax(concat_cols(logits), dst, n);

    std::vector<Var> head_out;
    for (Index k = 0; k < cfg.heads; ++k) {
      Var messages = mul(sender_heads[k], slice_cols(alpha, k, 1));
      head_out.push_back(elu(segment_sum(messages, dst, n)));
    }
    x = matmul(concat_cols(head_out), layer.w_proj);
    records.push_back(gather_rows(alpha, real_rows));
  }
  return {x, concat_cols(records)};
}

Var patient_representation(Var embeddings,
                           std::span<const LocalIndex> phenotype_locals,
                           Var query) {
  if (phenotype_locals.empty()) {
    throw std::invalid_argument("patient_representation: no phenotypes");
  }
  std::vector<Index> rows(phenotype_locals.begin(), phenotype_locals.end());
  const std::vector<Index> one_segment(rows.size(), 0);
  Var h = gather_rows(embeddings, rows);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(h.cols()));
  Var weights = segment_softmax(scale(matmul(h, query), inv_sqrt_d), one_segment, 1);
  return segment_sum(mul(h, weights), one_segment, 1);
}

Var score_edges(Var embeddings, Var attention, Var patient,
                const ParamVars& params, const SampledSubgraph& sg) {
  const LocalIndex e = sg.arc_count();
  std::vector<Index> src(static_cast<std::size_t>(e));
  std::vector<Index> dst(static_cast<std::size_t>(e));
  for (LocalIndex a = 0; a < e; ++a) {
    src[a] = sg.local_arcs[a].src;
    dst[a] = sg.local_arcs[a].dst;
  }
  const std::vector<Index> broadcast(static_cast<std::size_t>(e), 0);
  Var hs = gather_rows(embeddings, src);
  Var ht = gather_rows(embeddings, dst);
  Var features = concat_cols({matmul(attention, params.attn_projection),
                              gather_rows(patient, broadcast), abs_diff(hs, ht),
                              mul(hs, ht)});
  Var hidden = relu(matmul(features, params.edge_w1) + params.edge_b1);
  return matmul(hidden, params.edge_w2) + params.edge_b2;
}

Var score_genes(Var patient, Var embeddings, Var edge_scores,
                std::span<const LocalIndex> gene_locals, double penalty_weight,
                const SampledSubgraph& sg) {
  if (gene_locals.empty()) throw std::invalid_argument("score_genes: no genes");
  std::vector<LocalIndex> gene_pos(static_cast<std::size_t>(sg.node_count()), -1);
  for (std::size_t i = 0; i < gene_locals.size(); ++i) {
    gene_pos.at(static_cast<std::size_t>(gene_locals[i])) = static_cast<LocalIndex>(i);
  }
  std::vector<Index> incoming;
  std::vector<Index> segment;
  std::vector<char> has_incoming(gene_locals.size(), 0);
  for (LocalIndex a = 0; a < sg.arc_count(); ++a) {
    const LocalIndex g = gene_pos[sg.local_arcs[a].dst];
    if (g >= 0) {
      incoming.push_back(a);
      segment.push_back(g);
      has_incoming[g] = 1;
    }
  }
  for (std::size_t i = 0; i < gene_locals.size(); ++i) {
    if (!has_incoming[i]) {
      throw std::logic_error("score_genes: gene without incoming arcs");
    }
  }

  std::vector<Index> rows(gene_locals.begin(), gene_locals.end());
  Var hg = gather_rows(embeddings, rows);
  Var cosine = div(matmul(hg, transpose(patient)),
                   mul(l2_norm_rows(hg), l2_norm(patient)));
  Var support = segment_mean(sigmoid(gather_rows(edge_scores, incoming)), segment,
                             static_cast<Index>(gene_locals.size()));
  // cos - lambda * (1 - c) == cos + lambda * c - lambda
  return add_scalar(cosine + scale(clamp(support, 0.0, 1.0), penalty_weight),
                    -penalty_weight);
}

ForwardResult forward(const ParamVars& params, const ModelConfig& cfg,
                      const SampledSubgraph& sg) {
  ForwardResult r;
  r.gat = gat_forward(params, cfg, sg);
  r.patient = patient_representation(r.gat.embeddings, sg.phenotype_locals,
                                     params.query);
  r.edge_scores = score_edges(r.gat.embeddings, r.gat.attention, r.patient,
                              params, sg);
  if (!sg.gene_locals.empty()) {
    r.gene_scores = score_genes(r.patient, r.gat.embeddings, r.edge_scores,
                                sg.gene_locals, cfg.penalty_weight, sg);
  }
  return r;
}

ScoreBundle score(const ModelParams& params, const ModelConfig& cfg,
                  const SampledSubgraph& sg) {
  Tape tape;
  const ParamVars vars = attach_params(tape, params, sg, false);
  const ForwardResult r = forward(vars, cfg, sg);
  ScoreBundle b;
  b.node_embeddings = r.gat.embeddings.value();
  b.attention = r.gat.attention.value();
  b.patient = r.patient.value();
  const Matrix& es = r.edge_scores.value();
  b.edge_scores.assign(es.data(), es.data() + es.size());
  if (r.gene_scores.valid()) {
    const Matrix& gs = r.gene_scores.value();
    b.gene_scores.assign(gs.data(), gs.data() + gs.size());
  }
  return b;
}

}  // namespace rarenet
