#pragma once

#include "rarenet/autodiff.hpp"
#include "rarenet/random.hpp"
#include "rarenet/sampler.hpp"

#include <string>
#include <utility>
#include <vector>

namespace rarenet {

struct ModelConfig {
  Index embed_dim = 128;
  Index hidden_dim = 128;
  Index out_dim = 64;
  Index heads = 4;
  Index layers = 3;
  Index attn_proj_dim = 16;
  Index edge_mlp_hidden = 64;
  /// Weight of the edge-evidence penalty in the gene score.
  double penalty_weight = 0.5;
  double leaky_slope = 0.2;

  Index head_dim() const { return hidden_dim / heads; }
  Index layer_input_dim(Index layer) const {
    return layer == 0 ? embed_dim : hidden_dim;
  }
  Index layer_output_dim(Index layer) const {
    return layer + 1 == layers ? out_dim : hidden_dim;
  }
  Index edge_feature_dim() const { return attn_proj_dim + 3 * out_dim; }
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

/// One GATv2 layer. Head k owns column block k of w_src / w_dst and column k
/// of `attention`.
struct GatLayerParams {
  Matrix w_src;      // in x hidden, transforms the message sender
  Matrix w_dst;      // in x hidden, transforms the receiver
  Matrix attention;  // head_dim x heads
  Matrix w_proj;     // hidden x out
};

struct ModelParams {
  Matrix node_embeddings;  // node_count x embed_dim
  std::vector<GatLayerParams> layers;
  Matrix query;            // out_dim x 1
  Matrix attn_projection;  // (layers * heads) x attn_proj_dim
  Matrix edge_w1;          // edge_feature_dim x edge_mlp_hidden
  Matrix edge_b1;          // 1 x edge_mlp_hidden
  Matrix edge_w2;          // edge_mlp_hidden x 1
  Matrix edge_b2;          // 1 x 1

  /// Stable (name, tensor) listing used by the optimizer and checkpoints.
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;
  ModelParams zeros_like() const;
};

/// Glorot-uniform weights, zero biases, query ~ N(0, 0.1).
ModelParams init_params(const ModelConfig& cfg, Index node_count, Rng& rng);

/// Throws std::invalid_argument when a tensor shape disagrees with cfg.
void check_shapes(const ModelParams& params, const ModelConfig& cfg,
                  Index node_count);

/// Parameters placed on a tape. `node_embeddings` holds one row per local
/// node of the subgraph being scored.
struct GatLayerVars {
  Var w_src, w_dst, attention, w_proj;
};

struct ParamVars {
  Var node_embeddings;
  std::vector<GatLayerVars> layers;
  Var query, attn_projection, edge_w1, edge_b1, edge_w2, edge_b2;
};

/// Copies the parameters onto the tape, gathering only the embedding rows of
/// the subgraph's nodes.
ParamVars attach_params(Tape& tape, const ModelParams& params,
                        const SampledSubgraph& sg, bool trainable);

/// Builds ParamVars from vars in ModelParams::tensors() order, gathering the
/// subgraph rows from the full embedding table on the tape.
ParamVars param_vars_from_list(std::span<const Var> vars, Index layers,
                               const SampledSubgraph& sg);

/// Adds the tape gradients of `vars` into `grads` (embedding rows scattered
/// back to their global positions).
void accumulate_gradients(const Tape& tape, const ParamVars& vars,
                          const SampledSubgraph& sg, ModelParams& grads);

struct GatOutput {
  Var embeddings;  // local nodes x out_dim
  Var attention;   // local arcs x (layers * heads)
};

GatOutput gat_forward(const ParamVars& params, const ModelConfig& cfg,
                      const SampledSubgraph& sg);

/// Scaled dot-product pooling of the phenotype embeddings (1 x out_dim).
Var patient_representation(Var embeddings,
                           std::span<const LocalIndex> phenotype_locals,
                           Var query);

/// Raw per-arc scores (local arcs x 1).
Var score_edges(Var embeddings, Var attention, Var patient,
                const ParamVars& params, const SampledSubgraph& sg);

/// cos(p, h_g) - lambda * (1 - clamp(mean incoming sigmoid(s_edge), 0, 1)),
/// one row per entry of gene_locals.
Var score_genes(Var patient, Var embeddings, Var edge_scores,
                std::span<const LocalIndex> gene_locals, double penalty_weight,
                const SampledSubgraph& sg);

struct ForwardResult {
  GatOutput gat;
  Var patient;
  Var edge_scores;
  Var gene_scores;  // invalid when the subgraph has no genes
};

ForwardResult forward(const ParamVars& params, const ModelConfig& cfg,
                      const SampledSubgraph& sg);

struct ScoreBundle {
  Matrix node_embeddings;  // local nodes x out_dim
  Matrix attention;        // local arcs x (layers * heads)
  Matrix patient;          // 1 x out_dim
  std::vector<double> edge_scores;
  std::vector<double> gene_scores;  // aligned with sg.gene_locals
};

/// Inference-only forward pass.
ScoreBundle score(const ModelParams& params, const ModelConfig& cfg,
                  const SampledSubgraph& sg);

}  // namespace rarenet
