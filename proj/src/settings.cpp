#include "rarenet/settings.hpp"

#include <sstream>

namespace rarenet {

const std::set<std::string>& training_keys() {
  static const std::set<std::string> keys{
      "embed_dim", "hidden_dim", "out_dim", "heads", "layers", "attn_proj_dim",
      "edge_mlp_hidden", "penalty_weight", "leaky_slope",
      "margin", "l1_weight", "l2_weight", "sparsity_weight", "sparsity_threshold",
      "gene_alpha", "gene_beta", "gene_threshold", "gene_weight", "max_margin_pairs",
      "learning_rate", "lr_step", "lr_factor", "epochs", "seed", "beta1", "beta2",
      "epsilon", "grad_clip_norm", "accumulate", "negative_ratio", "hops",
      "validation_fraction"};
  return keys;
}

const std::set<std::string>& extraction_keys() {
  static const std::set<std::string> keys{"hops", "edge_top_k", "gene_top_k",
                                          "edge_percentile", "gene_threshold"};
  return keys;
}

void apply_training_keys(const KeyValues& kv, TrainingSettings& out) {
  kv.reject_unknown(training_keys());
  // Work on a copy so a rejected document leaves `out` untouched.
  TrainingSettings s = out;
  ModelConfig& m = s.model;
  kv.read("embed_dim", m.embed_dim);
  kv.read("hidden_dim", m.hidden_dim);
  kv.read("out_dim", m.out_dim);
  kv.read("heads", m.heads);
  kv.read("layers", m.layers);
  kv.read("attn_proj_dim", m.attn_proj_dim);
  kv.read("edge_mlp_hidden", m.edge_mlp_hidden);
  kv.read("penalty_weight", m.penalty_weight);
  kv.read("leaky_slope", m.leaky_slope);
  LossConfig& l = s.loss;
  kv.read("margin", l.margin);
  kv.read("l1_weight", l.l1_weight);
  kv.read("l2_weight", l.l2_weight);
  kv.read("sparsity_weight", l.sparsity_weight);
  kv.read("sparsity_threshold", l.sparsity_threshold);
  kv.read("gene_alpha", l.gene_alpha);
  kv.read("gene_beta", l.gene_beta);
  kv.read("gene_threshold", l.gene_threshold);
  kv.read("gene_weight", l.gene_weight);
  kv.read("max_margin_pairs", l.max_margin_pairs);
  TrainConfig& t = s.train;
  kv.read("learning_rate", t.learning_rate);
  kv.read("lr_step", t.lr_step);
  kv.read("lr_factor", t.lr_factor);
  kv.read("epochs", t.epochs);
  kv.read("seed", t.seed);
  kv.read("beta1", t.beta1);
  kv.read("beta2", t.beta2);
  kv.read("epsilon", t.epsilon);
  kv.read("grad_clip_norm", t.grad_clip_norm);
  kv.read("accumulate", t.accumulate);
  kv.read("negative_ratio", t.negative_ratio);
  kv.read("hops", t.hops);
  kv.read("validation_fraction", t.validation_fraction);
  try {
    m.validate();
    l.validate();
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  out = s;
}

void apply_extraction_keys(const KeyValues& kv, ExtractionConfig& out,
                           double penalty_weight) {
  kv.reject_unknown(extraction_keys());
  ExtractionConfig c = out;
  kv.read("hops", c.hops);
  kv.read("edge_top_k", c.edge_top_k);
  kv.read("gene_top_k", c.gene_top_k);
  kv.read("edge_percentile", c.edge_percentile);
  kv.read("gene_threshold", c.gene_threshold);
  try {
    c.validate(penalty_weight);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  out = c;
}

std::string training_text(const TrainingSettings& s) {
  std::ostringstream o;
  o.precision(17);
  const ModelConfig& m = s.model;
  const LossConfig& l = s.loss;
  const TrainConfig& t = s.train;
  o << "embed_dim = " << m.embed_dim << "\nhidden_dim = " << m.hidden_dim
    << "\nout_dim = " << m.out_dim << "\nheads = " << m.heads << "\nlayers = " << m.layers
    << "\nattn_proj_dim = " << m.attn_proj_dim << "\nedge_mlp_hidden = " << m.edge_mlp_hidden
    << "\npenalty_weight = " << m.penalty_weight << "\nleaky_slope = " << m.leaky_slope
    << "\nmargin = " << l.margin << "\nl1_weight = " << l.l1_weight
    << "\nl2_weight = " << l.l2_weight << "\nsparsity_weight = " << l.sparsity_weight
    << "\nsparsity_threshold = " << l.sparsity_threshold << "\ngene_alpha = " << l.gene_alpha
    << "\ngene_beta = " << l.gene_beta << "\ngene_threshold = " << l.gene_threshold
    << "\ngene_weight = " << l.gene_weight << "\nmax_margin_pairs = " << l.max_margin_pairs
    << "\nlearning_rate = " << t.learning_rate << "\nlr_step = " << t.lr_step
    << "\nlr_factor = " << t.lr_factor << "\nepochs = " << t.epochs << "\nseed = " << t.seed
    << "\nbeta1 = " << t.beta1 << "\nbeta2 = " << t.beta2 << "\nepsilon = " << t.epsilon
    << "\ngrad_clip_norm = " << t.grad_clip_norm << "\naccumulate = " << t.accumulate
    << "\nnegative_ratio = " << t.negative_ratio << "\nhops = " << t.hops
    << "\nvalidation_fraction = " << t.validation_fraction << '\n';
  return o.str();
}

std::string extraction_text(const ExtractionConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "hops = " << c.hops << "\nedge_top_k = " << c.edge_top_k
    << "\ngene_top_k = " << c.gene_top_k << "\nedge_percentile = " << c.edge_percentile
    << "\ngene_threshold = " << c.gene_threshold << '\n';
  return o.str();
}

}  // namespace rarenet
