#include "rarenet/eval.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rarenet {

bool ranks_before(const ScoredGene& a, const ScoredGene& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.gene < b.gene;
}

Ranking::Ranking(std::vector<ScoredGene> ordered) : entries_(std::move(ordered)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!position_.emplace(entries_[i].gene, static_cast<Index>(i)).second) {
      throw std::invalid_argument("ranking lists gene " +
                                  std::to_string(entries_[i].gene) + " twice");
    }
  }
}

std::optional<Index> Ranking::rank_of(NodeId gene, TieMode mode) const {
  auto it = position_.find(gene);
  if (it == position_.end()) return std::nullopt;
  Index pos = it->second;
  if (mode == TieMode::WorstCase) {
    // Ties may not be contiguous when the order came from a file, so count.
    const double s = entries_[static_cast<std::size_t>(pos)].score;
    Index ahead = 0;
    for (const ScoredGene& e : entries_) {
      if (e.gene != gene && e.score >= s) ++ahead;
    }
    pos = ahead;
  }
  return pos + 1;
}

Ranking rank_genes(const std::map<NodeId, double>& gene_scores) {
  std::vector<ScoredGene> v;
  v.reserve(gene_scores.size());
  for (const auto& [g, s] : gene_scores) v.push_back({g, s});
  std::sort(v.begin(), v.end(), ranks_before);
  return Ranking(std::move(v));
}

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) {
    throw std::invalid_argument("patient lists are not aligned (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

double hits_at_k(std::span<const Ranking> rankings,
                 std::span<const std::optional<NodeId>> truths, Index k,
                 TieMode mode) {
  check_aligned(rankings.size(), truths.size());
  if (rankings.empty()) return 0.0;
  Index hits = 0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (!truths[i]) continue;
    const auto r = rankings[i].rank_of(*truths[i], mode);
    if (r && *r <= k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double mrr(std::span<const Ranking> rankings,
           std::span<const std::optional<NodeId>> truths, TieMode mode) {
  check_aligned(rankings.size(), truths.size());
  if (rankings.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    if (!truths[i]) continue;
    if (const auto r = rankings[i].rank_of(*truths[i], mode)) {
      total += 1.0 / static_cast<double>(*r);
    }
  }
  return 100.0 * total / static_cast<double>(rankings.size());
}

double inclusion_rate(std::span<const std::set<NodeId>> extracted,
                      std::span<const std::optional<NodeId>> truths) {
  check_aligned(extracted.size(), truths.size());
  if (extracted.empty()) return 0.0;
  Index included = 0;
  for (std::size_t i = 0; i < extracted.size(); ++i) {
    if (truths[i] && extracted[i].contains(*truths[i])) ++included;
  }
  return 100.0 * static_cast<double>(included) /
         static_cast<double>(extracted.size());
}

MetricReport ranking_report(std::span<const Ranking> rankings,
                            std::span<const std::optional<NodeId>> truths,
                            std::span<const Index> ks, TieMode mode) {
  MetricReport r;
  r.n_patients = static_cast<Index>(rankings.size());
  for (Index k : ks) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    r.hits_at[k] = hits_at_k(rankings, truths, k, mode);
  }
  r.mrr = mrr(rankings, truths, mode);
  return r;
}

namespace {

double one_decimal(double v) { return std::round(v * 10.0) / 10.0; }

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json hits = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.hits_at) hits[std::to_string(k)] = one_decimal(v);
  j["hits_at"] = std::move(hits);
  j["mrr"] = r.mrr ? nlohmann::ordered_json(one_decimal(*r.mrr)) : nullptr;
  j["inclusion_rate"] =
      r.inclusion_rate ? nlohmann::ordered_json(one_decimal(*r.inclusion_rate)) : nullptr;
  j["n_patients"] = r.n_patients;
  return j.dump(2);
}

std::string report_table(const MetricReport& r) {
  std::ostringstream out;
  out << "metric          value\n";
  for (const auto& [k, v] : r.hits_at) {
    std::string name = "Hit@" + std::to_string(k);
    name.resize(16, ' ');
    out << name << fixed1(v) << '\n';
  }
  if (r.mrr) out << "MRR             " << fixed1(*r.mrr) << '\n';
  if (r.inclusion_rate) out << "Inclusion       " << fixed1(*r.inclusion_rate) << '\n';
  out << "patients        " << r.n_patients << '\n';
  return out.str();
}

}  // namespace rarenet
