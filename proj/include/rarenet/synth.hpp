#pragma once

#include "rarenet/config.hpp"
#include "rarenet/kg_store.hpp"
#include "rarenet/sampler.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rarenet {

enum class SplitMode { DisjointGenes, Mixed };

struct SynthConfig {
  std::int64_t n_diseases = 40;
  std::int64_t genes_per_disease = 5;
  std::int64_t phenos_per_disease = 8;
  /// Shared phenotype vocabulary each disease draws from; 0 gives every
  /// disease its own phenotypes.
  std::int64_t phenotype_pool_size = 0;
  std::int64_t n_background_nodes = 1000;
  /// Share of background nodes typed as genes (the rest are `other`).
  double background_gene_fraction = 0.3;
  double background_edge_prob = 0.003;
  double phenotype_noise_rate = 0.2;
  /// Add the noise phenotypes instead of substituting them.
  bool additive_noise = false;
  std::int64_t phenotypes_per_patient = 5;
  std::int64_t n_patients = 500;
  SplitMode split_mode = SplitMode::Mixed;
  /// Test share for the mixed split.
  double test_fraction = 0.2;
  /// Share of disease genes held out for the disjoint split.
  double holdout_gene_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
  /// Canonical `key = value` text, used for hashing and manifests.
  std::string canonical_text() const;
};

SynthConfig synth_config_from(const KeyValues& kv);

struct SynthDisease {
  NodeId node;
  std::vector<NodeId> genes;
  std::vector<NodeId> phenotypes;
};

struct SynthGraph {
  KnowledgeGraph graph;
  std::vector<SynthDisease> diseases;
  std::vector<NodeId> phenotypes;
};

struct SynthCohort {
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> test;
  /// Disease index of every generated patient, in generation order.
  std::vector<std::size_t> disease_of;
  /// Phenotype slots drawn and how many of them were noise.
  std::int64_t phenotype_slots = 0;
  std::int64_t noisy_slots = 0;
  std::vector<std::string> warnings;
};

/// Node order: phenotypes, diseases, disease genes, background nodes. Each
/// disease is linked to its genes and phenotypes; every node pair then gains
/// a background edge with probability background_edge_prob.
SynthGraph generate_kg(const SynthConfig& cfg);

SynthCohort generate_cohort(const SynthConfig& cfg, const SynthGraph& sg);

struct SynthFiles {
  std::filesystem::path nodes, edges, train, test;
};

SynthFiles synth_paths(const std::filesystem::path& out_dir);

/// Generates and writes all dataset files; returns file name -> SHA-256.
std::map<std::string, std::string> write_synth_dataset(
    const SynthConfig& cfg, const std::filesystem::path& out_dir,
    std::vector<std::string>* warnings = nullptr);

}  // namespace rarenet
