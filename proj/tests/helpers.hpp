#pragma once
// Small builders shared by the unit tests.

#include "rarenet/kg_store.hpp"
#include "rarenet/model.hpp"
#include "rarenet/random.hpp"
#include "rarenet/sampler.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace testing {

using namespace rarenet;

struct NodeSpec {
  std::string key;
  NodeType type;
};

inline KnowledgeGraph make_graph(const std::vector<NodeSpec>& nodes,
                                 const std::vector<std::pair<std::string, std::string>>& edges) {
  GraphBuilder b;
  for (const auto& n : nodes) b.add_node(n.key, n.type, n.key);
  for (const auto& [u, v] : edges) b.add_edge(*b.find(u), *b.find(v), "rel");
  return std::move(b).build();
}

/// Random graph with mixed node types; node i gets key "n<i>". The first
/// `phenotypes` nodes are phenotypes, the rest are drawn from the other types.
inline KnowledgeGraph random_graph(Index n, double p, std::uint64_t seed,
                                   Index phenotypes = 3, double gene_share = 0.4) {
  Rng rng(seed);
  GraphBuilder b;
  for (Index i = 0; i < n; ++i) {
    NodeType t = NodeType::Phenotype;
    if (i >= phenotypes) {
      const double u = uniform01(rng);
      t = u < gene_share ? NodeType::Gene : (u < 0.7 ? NodeType::Disease : NodeType::Other);
    }
    b.add_node("n" + std::to_string(i), t, "node " + std::to_string(i));
  }
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      if (uniform01(rng) < p) b.add_edge(u, v, "rel");
    }
  }
  return std::move(b).build();
}

inline ModelConfig small_config() {
  ModelConfig c;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.out_dim = 6;
  c.heads = 2;
  c.layers = 2;
  c.attn_proj_dim = 3;
  c.edge_mlp_hidden = 5;
  return c;
}

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rarenet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace testing

#include "rarenet/synth.hpp"
#include "rarenet/trainer.hpp"

namespace testing {

/// A few diseases on a sparse background; trains in well under a second.
inline rarenet::SynthConfig tiny_synth(std::uint64_t seed = 3) {
  rarenet::SynthConfig c;
  c.n_diseases = 4;
  c.genes_per_disease = 3;
  c.phenos_per_disease = 4;
  c.n_background_nodes = 30;
  c.background_edge_prob = 0.03;
  c.phenotypes_per_patient = 3;
  c.n_patients = 24;
  c.seed = seed;
  return c;
}

inline rarenet::TrainConfig quick_train(std::int64_t epochs) {
  rarenet::TrainConfig t;
  t.epochs = epochs;
  t.learning_rate = 1e-2;
  t.seed = 5;
  return t;
}

}  // namespace testing
