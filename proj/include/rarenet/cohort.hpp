#pragma once

#include "rarenet/kg_store.hpp"
#include "rarenet/sampler.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rarenet {

/// Reads a JSON Lines cohort:
///   {"id": str, "phenotypes": [node_id...], "causal_gene": node_id | null}
/// Phenotype keys that are not graph nodes are dropped and reported through
/// `warnings`; so is a causal gene key that is not a node (the key itself is
/// kept for evaluation).
std::vector<PatientRecord> load_cohort(const std::filesystem::path& path,
                                       const KnowledgeGraph& g,
                                       std::vector<std::string>* warnings = nullptr);

/// One JSON line per patient, keys in the order id, phenotypes, causal_gene.
std::string cohort_line(const PatientRecord& p, const KnowledgeGraph& g);
void write_cohort(const std::filesystem::path& path,
                  std::span<const PatientRecord> patients,
                  const KnowledgeGraph& g);

}  // namespace rarenet
