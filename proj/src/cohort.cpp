#include "rarenet/cohort.hpp"

#include "json.hpp"

#include <fstream>
#include <set>

namespace rarenet {

std::vector<PatientRecord> load_cohort(const std::filesystem::path& path,
                                       const KnowledgeGraph& g,
                                       std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), 0, "cannot open file");
  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };

  std::vector<PatientRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string(), lineno, e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() ||
        !j.contains("phenotypes") || !j["phenotypes"].is_array()) {
      throw FormatError(path.string(), lineno,
                        "expected {\"id\": str, \"phenotypes\": [...], "
                        "\"causal_gene\": str|null}");
    }
    PatientRecord p;
    p.id = j["id"].get<std::string>();
    if (!seen.insert(p.id).second) {
      throw FormatError(path.string(), lineno, "duplicate patient id '" + p.id + "'");
    }
    for (const auto& ph : j["phenotypes"]) {
      if (!ph.is_string()) {
        throw FormatError(path.string(), lineno, "phenotype ids must be strings");
      }
      const auto key = ph.get<std::string>();
      if (auto v = g.find(key)) {
        p.phenotypes.push_back(*v);
      } else {
        warn("patient " + p.id + ": phenotype '" + key + "' not in graph, skipped");
      }
    }
    if (j.contains("causal_gene") && !j["causal_gene"].is_null()) {
      if (!j["causal_gene"].is_string()) {
        throw FormatError(path.string(), lineno, "causal_gene must be a string or null");
      }
      p.causal_gene_key = j["causal_gene"].get<std::string>();
      if (auto v = g.find(*p.causal_gene_key)) {
        if (g.type(*v) != NodeType::Gene) {
          throw FormatError(path.string(), lineno,
                            "causal gene '" + *p.causal_gene_key + "' is not a gene");
        }
        p.causal_gene = *v;
      } else {
        warn("patient " + p.id + ": causal gene '" + *p.causal_gene_key +
             "' not in graph");
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string cohort_line(const PatientRecord& p, const KnowledgeGraph& g) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  auto phen = nlohmann::ordered_json::array();
  for (NodeId v : p.phenotypes) phen.push_back(g.key(v));
  j["phenotypes"] = std::move(phen);
  if (p.causal_gene) {
    j["causal_gene"] = g.key(*p.causal_gene);
  } else if (p.causal_gene_key) {
    j["causal_gene"] = *p.causal_gene_key;
  } else {
    j["causal_gene"] = nullptr;
  }
  return j.dump();
}

void write_cohort(const std::filesystem::path& path,
                  std::span<const PatientRecord> patients,
                  const KnowledgeGraph& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const PatientRecord& p : patients) out << cohort_line(p, g) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace rarenet
