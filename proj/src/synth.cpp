#include "rarenet/synth.hpp"

#include "rarenet/cohort.hpp"
#include "rarenet/hashing.hpp"
#include "rarenet/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace rarenet {

void SynthConfig::validate() const {
  auto positive = [](std::int64_t v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
  };
  auto rate = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  positive(n_diseases, "n_diseases");
  positive(genes_per_disease, "genes_per_disease");
  positive(phenos_per_disease, "phenos_per_disease");
  positive(phenotypes_per_patient, "phenotypes_per_patient");
  positive(n_patients, "n_patients");
  if (n_background_nodes < 0) throw ConfigError("n_background_nodes must be >= 0");
  if (phenotype_pool_size < 0) throw ConfigError("phenotype_pool_size must be >= 0");
  if (phenotype_pool_size > 0 && phenotype_pool_size < phenos_per_disease) {
    throw ConfigError("phenotype_pool_size is smaller than phenos_per_disease");
  }
  rate(background_gene_fraction, "background_gene_fraction");
  rate(background_edge_prob, "background_edge_prob");
  rate(phenotype_noise_rate, "phenotype_noise_rate");
  rate(test_fraction, "test_fraction");
  rate(holdout_gene_fraction, "holdout_gene_fraction");
}

std::string SynthConfig::canonical_text() const {
  std::ostringstream out;
  out.precision(17);
  out << "n_diseases = " << n_diseases << '\n'
      << "genes_per_disease = " << genes_per_disease << '\n'
      << "phenos_per_disease = " << phenos_per_disease << '\n'
      << "phenotype_pool_size = " << phenotype_pool_size << '\n'
      << "n_background_nodes = " << n_background_nodes << '\n'
      << "background_gene_fraction = " << background_gene_fraction << '\n'
      << "background_edge_prob = " << background_edge_prob << '\n'
      << "phenotype_noise_rate = " << phenotype_noise_rate << '\n'
      << "additive_noise = " << (additive_noise ? "true" : "false") << '\n'
      << "phenotypes_per_patient = " << phenotypes_per_patient << '\n'
      << "n_patients = " << n_patients << '\n'
      << "split_mode = " << (split_mode == SplitMode::Mixed ? "mixed" : "disjoint_genes")
      << '\n'
      << "test_fraction = " << test_fraction << '\n'
      << "holdout_gene_fraction = " << holdout_gene_fraction << '\n'
      << "seed = " << seed << '\n';
  return out.str();
}

SynthConfig synth_config_from(const KeyValues& kv) {
  kv.reject_unknown({"n_diseases", "genes_per_disease", "phenos_per_disease",
                     "phenotype_pool_size", "n_background_nodes",
                     "background_gene_fraction", "background_edge_prob",
                     "phenotype_noise_rate", "additive_noise", "phenotypes_per_patient",
                     "n_patients", "split_mode", "test_fraction", "holdout_gene_fraction",
                     "seed"});
  SynthConfig c;
  kv.read("n_diseases", c.n_diseases);
  kv.read("genes_per_disease", c.genes_per_disease);
  kv.read("phenos_per_disease", c.phenos_per_disease);
  kv.read("phenotype_pool_size", c.phenotype_pool_size);
  kv.read("n_background_nodes", c.n_background_nodes);
  kv.read("background_gene_fraction", c.background_gene_fraction);
  kv.read("background_edge_prob", c.background_edge_prob);
  kv.read("phenotype_noise_rate", c.phenotype_noise_rate);
  kv.read("additive_noise", c.additive_noise);
  kv.read("phenotypes_per_patient", c.phenotypes_per_patient);
  kv.read("n_patients", c.n_patients);
  std::string mode = "mixed";
  kv.read("split_mode", mode);
  if (mode == "mixed") {
    c.split_mode = SplitMode::Mixed;
  } else if (mode == "disjoint_genes") {
    c.split_mode = SplitMode::DisjointGenes;
  } else {
    throw ConfigError("split_mode must be 'mixed' or 'disjoint_genes', got '" + mode + "'");
  }
  kv.read("test_fraction", c.test_fraction);
  kv.read("holdout_gene_fraction", c.holdout_gene_fraction);
  kv.read("seed", c.seed);
  c.validate();
  return c;
}

namespace {

std::string numbered(const char* prefix, std::int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05lld", prefix, static_cast<long long>(i));
  return buf;
}

}  // namespace

SynthGraph generate_kg(const SynthConfig& cfg) {
  cfg.validate();
  GraphBuilder b;
  SynthGraph out;

  const std::int64_t n_pheno = cfg.phenotype_pool_size > 0
                                   ? cfg.phenotype_pool_size
                                   : cfg.n_diseases * cfg.phenos_per_disease;
  for (std::int64_t i = 0; i < n_pheno; ++i) {
    out.phenotypes.push_back(
        b.add_node(numbered("HP", i), NodeType::Phenotype, "phenotype " + std::to_string(i)));
  }
  for (std::int64_t d = 0; d < cfg.n_diseases; ++d) {
    SynthDisease dis;
    dis.node = b.add_node(numbered("DIS", d), NodeType::Disease, "disease " + std::to_string(d));
    out.diseases.push_back(std::move(dis));
  }
  for (std::int64_t d = 0; d < cfg.n_diseases; ++d) {
    for (std::int64_t j = 0; j < cfg.genes_per_disease; ++j) {
      const std::int64_t i = d * cfg.genes_per_disease + j;
      out.diseases[d].genes.push_back(
          b.add_node(numbered("GENE", i), NodeType::Gene, "gene " + std::to_string(i)));
    }
  }
  Rng type_rng = make_rng(cfg.seed, "synth.background_types");
  for (std::int64_t i = 0; i < cfg.n_background_nodes; ++i) {
    const bool gene = uniform01(type_rng) < cfg.background_gene_fraction;
    b.add_node(numbered(gene ? "BGENE" : "BNODE", i), gene ? NodeType::Gene : NodeType::Other,
               "background " + std::to_string(i));
  }

  Rng pheno_rng = make_rng(cfg.seed, "synth.disease_phenotypes");
  for (std::int64_t d = 0; d < cfg.n_diseases; ++d) {
    SynthDisease& dis = out.diseases[d];
    if (cfg.phenotype_pool_size > 0) {
      for (std::size_t k : sample_without_replacement(
               pheno_rng, static_cast<std::size_t>(n_pheno),
               static_cast<std::size_t>(cfg.phenos_per_disease))) {
        dis.phenotypes.push_back(out.phenotypes[k]);
      }
      std::sort(dis.phenotypes.begin(), dis.phenotypes.end());
    } else {
      for (std::int64_t j = 0; j < cfg.phenos_per_disease; ++j) {
        dis.phenotypes.push_back(out.phenotypes[d * cfg.phenos_per_disease + j]);
      }
    }
    for (NodeId gnode : dis.genes) b.add_edge(dis.node, gnode, "disease_gene");
    for (NodeId p : dis.phenotypes) b.add_edge(p, dis.node, "phenotype_disease");
  }

  const NodeId n = b.node_count();
  if (cfg.background_edge_prob > 0.0) {
    Rng edge_rng = make_rng(cfg.seed, "synth.background_edges");
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        if (uniform01(edge_rng) < cfg.background_edge_prob) b.add_edge(u, v, "background");
      }
    }
  }
  out.graph = std::move(b).build();
  return out;
}

SynthCohort generate_cohort(const SynthConfig& cfg, const SynthGraph& sg) {
  cfg.validate();
  SynthCohort out;
  if (cfg.phenotypes_per_patient > cfg.phenos_per_disease) {
    out.warnings.push_back("phenotypes_per_patient exceeds phenos_per_disease; patients get "
                           "every phenotype of their disease");
  }
  Rng rng = make_rng(cfg.seed, "synth.patients");
  std::vector<PatientRecord> all;
  for (std::int64_t i = 0; i < cfg.n_patients; ++i) {
    const std::size_t d = uniform_index(rng, sg.diseases.size());
    const SynthDisease& dis = sg.diseases[d];
    PatientRecord p;
    p.id = numbered("patient_", i);
    p.causal_gene = dis.genes[uniform_index(rng, dis.genes.size())];
    p.causal_gene_key = sg.graph.key(*p.causal_gene);

    const std::size_t take = std::min<std::size_t>(
        static_cast<std::size_t>(cfg.phenotypes_per_patient), dis.phenotypes.size());
    std::vector<NodeId> chosen;
    for (std::size_t k : sample_without_replacement(rng, dis.phenotypes.size(), take)) {
      chosen.push_back(dis.phenotypes[k]);
    }

    // Noise phenotypes come from outside the disease and the patient's set.
    std::set<NodeId> used(dis.phenotypes.begin(), dis.phenotypes.end());
    std::vector<NodeId> pool;
    for (NodeId ph : sg.phenotypes) {
      if (!used.contains(ph)) pool.push_back(ph);
    }
    std::vector<NodeId> result;
    std::vector<NodeId> noise;
    std::vector<NodeId> kept;
    for (NodeId ph : chosen) {
      if (uniform01(rng) < cfg.phenotype_noise_rate && !pool.empty()) {
        const std::size_t r = uniform_index(rng, pool.size());
        noise.push_back(pool[r]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(r));
      } else {
        kept.push_back(ph);
      }
    }
    out.phenotype_slots += static_cast<std::int64_t>(chosen.size());
    if (cfg.additive_noise) {
      result = chosen;
      result.insert(result.end(), noise.begin(), noise.end());
    } else {
      if (kept.empty() && !chosen.empty()) {
        // Keep one true phenotype so the causal gene stays within two hops.
        kept.push_back(chosen.front());
        noise.pop_back();
      }
      result = kept;
      result.insert(result.end(), noise.begin(), noise.end());
    }
    out.noisy_slots += static_cast<std::int64_t>(noise.size());
    std::sort(result.begin(), result.end());
    p.phenotypes = std::move(result);
    all.push_back(std::move(p));
    out.disease_of.push_back(d);
  }

  Rng split_rng = make_rng(cfg.seed, "synth.split");
  if (cfg.split_mode == SplitMode::Mixed) {
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(split_rng, order);
    const auto n_test = static_cast<std::size_t>(
        std::llround(cfg.test_fraction * static_cast<double>(all.size())));
    std::vector<char> is_test(all.size(), 0);
    for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;
    for (std::size_t i = 0; i < all.size(); ++i) {
      (is_test[i] ? out.test : out.train).push_back(all[i]);
    }
  } else {
    std::vector<NodeId> genes;
    for (const SynthDisease& dis : sg.diseases) {
      genes.insert(genes.end(), dis.genes.begin(), dis.genes.end());
    }
    auto n_hold = static_cast<std::size_t>(
        std::llround(cfg.holdout_gene_fraction * static_cast<double>(genes.size())));
    n_hold = std::clamp<std::size_t>(n_hold, 1, std::max<std::size_t>(genes.size() - 1, 1));
    std::set<NodeId> held;
    for (std::size_t k : sample_without_replacement(split_rng, genes.size(), n_hold)) {
      held.insert(genes[k]);
    }
    for (const PatientRecord& p : all) {
      (held.contains(*p.causal_gene) ? out.test : out.train).push_back(p);
    }
  }
  return out;
}

SynthFiles synth_paths(const std::filesystem::path& out_dir) {
  return {out_dir / "nodes.tsv", out_dir / "edges.tsv", out_dir / "train.jsonl",
          out_dir / "test.jsonl"};
}

std::map<std::string, std::string> write_synth_dataset(
    const SynthConfig& cfg, const std::filesystem::path& out_dir,
    std::vector<std::string>* warnings) {
  const SynthGraph g = generate_kg(cfg);
  const SynthCohort c = generate_cohort(cfg, g);
  if (warnings) warnings->insert(warnings->end(), c.warnings.begin(), c.warnings.end());
  std::filesystem::create_directories(out_dir);
  const SynthFiles f = synth_paths(out_dir);
  write_graph(g.graph, f.nodes, f.edges);
  write_cohort(f.train, c.train, g.graph);
  write_cohort(f.test, c.test, g.graph);
  std::map<std::string, std::string> hashes;
  for (const auto& p : {f.nodes, f.edges, f.train, f.test}) {
    hashes[p.filename().string()] = sha256_file(p);
  }
  return hashes;
}

}  // namespace rarenet
