#include "rarenet/cli.hpp"

#include "rarenet/cohort.hpp"
#include "rarenet/config.hpp"
#include "rarenet/eval.hpp"
#include "rarenet/extractor.hpp"
#include "rarenet/hashing.hpp"
#include "rarenet/kg_store.hpp"
#include "rarenet/sampler.hpp"
#include "rarenet/settings.hpp"
#include "rarenet/synth.hpp"
#include "rarenet/trainer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef RARENET_VERSION
#define RARENET_VERSION "0.0.0"
#endif

namespace rarenet {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string tool_version() { return RARENET_VERSION; }

namespace {

ojson manifest_body(const RunManifest& m) {
  ojson j;
  j["command"] = m.command;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed ? ojson(*m.seed) : ojson(nullptr);
  j["config"] = m.config;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  return j;
}

}  // namespace

std::string RunManifest::digest() const { return sha256_hex(manifest_body(*this).dump()); }

std::string manifest_json(const RunManifest& m) {
  ojson j = manifest_body(m);
  j["digest"] = m.digest();
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  return j.dump(2) + "\n";
}

void write_manifest(const RunManifest& m, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << manifest_json(m);
}

RunManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  const ojson j = ojson::parse(in);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
  m.config = j.at("config").get<std::map<std::string, std::string>>();
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return m;
}

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  void warn(const std::string& msg) const { err << "warning: " << msg << '\n'; }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::map<std::string, std::string> config_map(const std::string& text) {
  return KeyValues::parse(text).entries();
}

void add_input(RunManifest& m, const fs::path& p) {
  m.inputs[p.filename().string()] = sha256_file(p);
}

void add_output(RunManifest& m, const fs::path& p) {
  m.outputs[p.filename().string()] = sha256_file(p);
}

fs::path manifest_path_for(const fs::path& output) {
  return output.string() + ".manifest.json";
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// (by index) is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<ojson> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<ojson> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      rows.push_back(ojson::parse(line));
    } catch (const ojson::parse_error& e) {
      throw FormatError(path.string(), line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rows.back().is_object() || !rows.back().contains("id") ||
        !rows.back()["id"].is_string()) {
      throw FormatError(path.string(), line_no, "expected an object with a string \"id\"");
    }
  }
  return rows;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const std::string& l : lines) out << l << '\n';
}

std::vector<PatientRecord> load_patients(const fs::path& path, const KnowledgeGraph& g,
                                         const Context& ctx) {
  std::vector<std::string> warnings;
  auto cohort = load_cohort(path, g, &warnings);
  for (const auto& w : warnings) ctx.warn(w);
  return cohort;
}

NodeId gene_id(const KnowledgeGraph& g, const std::string& key, const fs::path& file) {
  const auto id = g.find(key);
  if (!id) throw std::runtime_error(file.string() + ": gene '" + key + "' is not a graph node");
  return *id;
}

void apply_overrides(KeyValues& kv, const std::vector<std::string>& sets) {
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    kv.set(s.substr(0, eq), s.substr(eq + 1));
  }
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, const Context& ctx) {
  Stopwatch clock;
  KeyValues kv = KeyValues::load(a.config);
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  const SynthConfig cfg = synth_config_from(kv);
  std::vector<std::string> warnings;
  RunManifest m;
  m.command = "synth";
  m.config = config_map(cfg.canonical_text());
  m.seed = cfg.seed;
  m.tool_version = tool_version();
  add_input(m, a.config);
  m.outputs = write_synth_dataset(cfg, a.out, &warnings);
  for (const auto& w : warnings) ctx.warn(w);
  m.wall_clock_seconds = clock.seconds();
  write_manifest(m, fs::path(a.out) / "manifest.json");
  ctx.out << "wrote dataset to " << a.out << '\n';
  return 0;
}

struct IngestArgs {
  std::string nodes, edges;
  std::vector<std::string> cohorts;
  bool check = false;
};

int cmd_ingest(const IngestArgs& a, const Context& ctx) {
  const KnowledgeGraph g = load_graph(a.nodes, a.edges);
  std::map<NodeType, std::int64_t> by_type;
  for (NodeId v = 0; v < g.node_count(); ++v) ++by_type[g.type(v)];
  std::int64_t patients = 0;
  for (const auto& c : a.cohorts) {
    const auto cohort = load_patients(c, g, ctx);
    for (const auto& p : cohort) {
      if (p.phenotypes.empty()) {
        throw std::runtime_error(c + ": patient " + p.id + " has no known phenotypes");
      }
    }
    patients += static_cast<std::int64_t>(cohort.size());
  }
  if (a.check) {
    ctx.out << "ok\n";
    return 0;
  }
  ctx.out << "nodes " << g.node_count() << " (";
  bool first = true;
  for (const auto& [t, n] : by_type) {
    ctx.out << (first ? "" : ", ") << to_string(t) << ' ' << n;
    first = false;
  }
  ctx.out << ")\nedges " << g.arc_count() / 2 << "\npatients " << patients << '\n';
  return 0;
}

struct TrainArgs {
  std::string nodes, edges, cohort, out, config, resume, trace;
  std::vector<std::string> sets;
  std::optional<std::int64_t> epochs;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cmd_train(const TrainArgs& a, const Context& ctx) {
  Stopwatch clock;
  std::optional<Checkpoint> resume;
  TrainingSettings s;
  if (!a.resume.empty()) {
    resume = load_checkpoint(a.resume);
    s.model = resume->model;
    s.loss = resume->loss;
    s.train = resume->train;
  }
  KeyValues kv = a.config.empty() ? KeyValues() : KeyValues::load(a.config);
  apply_overrides(kv, a.sets);
  if (a.epochs) kv.set("epochs", std::to_string(*a.epochs));
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  apply_training_keys(kv, s);
  if (s.train.epochs < 1) throw ConfigError("epochs must be >= 1");

  const KnowledgeGraph g = load_graph(a.nodes, a.edges);
  const auto cohort = load_patients(a.cohort, g, ctx);
  if (cohort.empty()) throw std::runtime_error("cohort " + a.cohort + " is empty");

  auto report = [&](const EpochReport& r) {
    if (a.quiet) return;
    ctx.out << "epoch " << r.epoch << " lr " << fmt("%.3g", r.learning_rate) << " loss "
            << fmt("%.6f", r.loss_total) << " (sub " << fmt("%.6f", r.loss_sub) << ", gene "
            << fmt("%.6f", r.loss_gene) << ")";
    if (r.validation_mrr == r.validation_mrr) {
      ctx.out << " val_mrr " << fmt("%.1f", r.validation_mrr);
    }
    ctx.out << std::endl;
  };
  TrainResult result =
      train(g, cohort, s.model, s.loss, s.train, resume ? &*resume : nullptr, report);

  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(result.checkpoint, out);
  const fs::path trace = a.trace.empty() ? fs::path(a.out + ".trace.csv") : fs::path(a.trace);
  std::vector<std::string> rows{
      "epoch,learning_rate,loss_sub,loss_gene,loss_total,hard_negatives,validation_mrr"};
  for (const EpochReport& r : result.checkpoint.trace) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g,%.17g,%.17g,%lld,%.17g",
                  static_cast<long long>(r.epoch), r.learning_rate, r.loss_sub, r.loss_gene,
                  r.loss_total, static_cast<long long>(r.hard_negatives), r.validation_mrr);
    rows.emplace_back(buf);
  }
  write_lines(trace, rows);

  RunManifest m;
  m.command = "train";
  m.config = config_map(training_text(s));
  m.seed = s.train.seed;
  m.tool_version = tool_version();
  add_input(m, a.nodes);
  add_input(m, a.edges);
  add_input(m, a.cohort);
  if (!a.config.empty()) add_input(m, a.config);
  if (!a.resume.empty()) add_input(m, a.resume);
  add_output(m, out);
  add_output(m, trace);
  m.wall_clock_seconds = clock.seconds();
  write_manifest(m, manifest_path_for(out));
  if (!a.quiet) ctx.out << "wrote checkpoint " << out.string() << '\n';
  return 0;
}

/// Subgraph and scores of one patient, or nothing when no phenotype is usable.
struct Scored {
  std::optional<SampledSubgraph> sg;
  ScoreBundle scores;
  std::string warning;
};

Scored score_patient(const KnowledgeGraph& g, const Checkpoint& ck, const PatientRecord& p,
                     int hops) {
  Scored s;
  if (p.phenotypes.empty()) {
    s.warning = "patient " + p.id + " has no known phenotypes; empty result";
    return s;
  }
  s.sg = sample_phenotype_subgraph(g, p.phenotypes, hops);
  s.scores = score(ck.serving_params(), ck.model, *s.sg);
  if (s.sg->gene_locals.empty()) {
    s.warning = "patient " + p.id + " has no candidate genes; empty ranking";
  }
  return s;
}

struct PredictArgs {
  std::string checkpoint, nodes, edges, patients, out;
  int jobs = 1;
  int hops = 0;
  int top = 0;
};

int cmd_predict(const PredictArgs& a, const Context& ctx) {
  Stopwatch clock;
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const KnowledgeGraph g = load_graph(a.nodes, a.edges);
  check_shapes(ck.serving_params(), ck.model, g.node_count());
  const auto patients = load_patients(a.patients, g, ctx);
  const int hops = a.hops > 0 ? a.hops : ck.train.hops;

  std::vector<std::string> lines(patients.size());
  std::vector<std::string> warnings(patients.size());
  parallel_for(patients.size(), a.jobs, [&](std::size_t i) {
    const Scored s = score_patient(g, ck, patients[i], hops);
    warnings[i] = s.warning;
    std::map<NodeId, double> scores;
    if (s.sg) {
      for (std::size_t k = 0; k < s.sg->gene_locals.size(); ++k) {
        scores[s.sg->local_nodes[s.sg->gene_locals[k]]] = s.scores.gene_scores[k];
      }
    }
    const Ranking r = rank_genes(scores);
    ojson j;
    j["id"] = patients[i].id;
    ojson ranking = ojson::array();
    for (const ScoredGene& e : r.entries()) {
      if (a.top > 0 && static_cast<int>(ranking.size()) >= a.top) break;
      ranking.push_back({{"gene", g.key(e.gene)}, {"score", e.score}});
    }
    j["ranking"] = std::move(ranking);
    lines[i] = j.dump();
  });
  for (const auto& w : warnings) {
    if (!w.empty()) ctx.warn(w);
  }
  write_lines(a.out, lines);

  RunManifest m;
  m.command = "predict";
  m.config = {{"hops", std::to_string(hops)}, {"top", std::to_string(a.top)}};
  m.seed = ck.train.seed;
  m.tool_version = tool_version();
  add_input(m, a.checkpoint);
  add_input(m, a.nodes);
  add_input(m, a.edges);
  add_input(m, a.patients);
  add_output(m, a.out);
  m.wall_clock_seconds = clock.seconds();
  write_manifest(m, manifest_path_for(a.out));
  return 0;
}

struct ExtractArgs {
  std::string checkpoint, nodes, edges, patients, out, config, dot_dir;
  std::vector<std::string> sets;
  std::optional<double> gene_threshold, edge_percentile;
  int jobs = 1;
};

int cmd_extract(const ExtractArgs& a, const Context& ctx) {
  Stopwatch clock;
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  KeyValues kv = a.config.empty() ? KeyValues() : KeyValues::load(a.config);
  apply_overrides(kv, a.sets);
  if (a.gene_threshold) kv.set("gene_threshold", fmt("%.17g", *a.gene_threshold));
  if (a.edge_percentile) kv.set("edge_percentile", fmt("%.17g", *a.edge_percentile));
  ExtractionConfig cfg;
  apply_extraction_keys(kv, cfg, ck.model.penalty_weight);

  const KnowledgeGraph g = load_graph(a.nodes, a.edges);
  check_shapes(ck.serving_params(), ck.model, g.node_count());
  const auto patients = load_patients(a.patients, g, ctx);
  if (!a.dot_dir.empty()) fs::create_directories(a.dot_dir);

  std::vector<std::string> lines(patients.size());
  std::vector<std::string> warnings(patients.size());
  std::vector<std::string> dots(patients.size());
  parallel_for(patients.size(), a.jobs, [&](std::size_t i) {
    const Scored s = score_patient(g, ck, patients[i], ck.train.hops);
    if (!s.sg) {
      warnings[i] = s.warning;
      ojson j;
      j["id"] = patients[i].id;
      j["nodes"] = ojson::array();
      j["genes"] = ojson::array();
      j["selected_genes"] = ojson::array();
      j["frontiers"] = ojson::array();
      lines[i] = j.dump();
      return;
    }
    const PatientGraph pg = extract_patient_graph(*s.sg, s.scores, cfg);
    lines[i] = patient_graph_json(patients[i].id, pg, g);
    if (!a.dot_dir.empty()) dots[i] = to_dot(g, to_export(pg, *s.sg, &s.scores));
  });
  for (const auto& w : warnings) {
    if (!w.empty()) ctx.warn(w);
  }
  write_lines(a.out, lines);

  RunManifest m;
  m.command = "extract";
  m.config = config_map(extraction_text(cfg));
  m.config["sampler_hops"] = std::to_string(ck.train.hops);
  m.seed = ck.train.seed;
  m.tool_version = tool_version();
  add_input(m, a.checkpoint);
  add_input(m, a.nodes);
  add_input(m, a.edges);
  add_input(m, a.patients);
  if (!a.config.empty()) add_input(m, a.config);
  add_output(m, a.out);
  if (!a.dot_dir.empty()) {
    for (std::size_t i = 0; i < patients.size(); ++i) {
      if (dots[i].empty()) continue;
      const fs::path p = fs::path(a.dot_dir) / (patients[i].id + ".dot");
      write_lines(p, {dots[i]});
      add_output(m, p);
    }
  }
  m.wall_clock_seconds = clock.seconds();
  write_manifest(m, manifest_path_for(a.out));
  return 0;
}

/// Reads a prediction / fused-ranking file: {"id", "ranking": [{"gene", "score"}]}.
std::map<std::string, Ranking> read_rankings(const fs::path& path, const KnowledgeGraph& g) {
  std::map<std::string, Ranking> out;
  for (const ojson& row : read_jsonl(path)) {
    std::vector<ScoredGene> entries;
    for (const ojson& e : row.at("ranking")) {
      entries.push_back({gene_id(g, e.at("gene").get<std::string>(), path),
                         e.at("score").get<double>()});
    }
    if (!out.emplace(row["id"].get<std::string>(), Ranking(std::move(entries))).second) {
      throw std::runtime_error(path.string() + ": patient " + row["id"].get<std::string>() +
                               " listed twice");
    }
  }
  return out;
}

/// Patient id -> node-set field of a patient-graph file.
std::map<std::string, std::vector<NodeId>> read_patient_graphs(const fs::path& path,
                                                               const KnowledgeGraph& g,
                                                               const std::string& field) {
  std::map<std::string, std::vector<NodeId>> out;
  for (const ojson& row : read_jsonl(path)) {
    std::vector<NodeId> ids;
    for (const ojson& k : row.at(field)) {
      const std::string key = k.get<std::string>();
      const auto id = g.find(key);
      if (!id) throw std::runtime_error(path.string() + ": node '" + key + "' is unknown");
      ids.push_back(*id);
    }
    out[row["id"].get<std::string>()] = std::move(ids);
  }
  return out;
}

template <typename T>
const T& lookup(const std::map<std::string, T>& m, const std::string& id,
                const std::string& file) {
  auto it = m.find(id);
  if (it == m.end()) throw std::runtime_error(file + " has no entry for patient " + id);
  return it->second;
}

std::vector<Index> parse_ks(const std::string& text) {
  std::vector<Index> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long k = std::stoll(item, &used);
      if (used != item.size() || k < 1) throw std::invalid_argument(item);
      ks.push_back(static_cast<Index>(k));
    } catch (const std::exception&) {
      throw ConfigError("--ks expects comma-separated positive integers, got '" + text + "'");
    }
  }
  if (ks.empty()) throw ConfigError("--ks is empty");
  return ks;
}

struct EvaluateArgs {
  std::string nodes, edges, truth, predictions, patient_graphs, out;
  std::string ks = "1,5,10";
  bool worst_case = false;
};

int cmd_evaluate(const EvaluateArgs& a, const Context& ctx) {
  Stopwatch clock;
  if (a.predictions.empty() && a.patient_graphs.empty()) {
    throw UsageError("evaluate needs --predictions and/or --patient-graphs");
  }
  const std::vector<Index> ks = parse_ks(a.ks);
  const KnowledgeGraph g = load_graph(a.nodes, a.edges);
  const auto truth = load_patients(a.truth, g, ctx);
  std::vector<std::optional<NodeId>> truths;
  for (const auto& p : truth) truths.push_back(p.causal_gene);
  const TieMode mode = a.worst_case ? TieMode::WorstCase : TieMode::ById;

  MetricReport report;
  report.n_patients = static_cast<Index>(truth.size());
  if (!a.predictions.empty()) {
    const auto by_id = read_rankings(a.predictions, g);
    std::vector<Ranking> rankings;
    for (const auto& p : truth) rankings.push_back(lookup(by_id, p.id, a.predictions));
    report = ranking_report(rankings, truths, ks, mode);
  }
  if (!a.patient_graphs.empty()) {
    const auto by_id = read_patient_graphs(a.patient_graphs, g, "nodes");
    std::vector<std::set<NodeId>> sets;
    for (const auto& p : truth) {
      const auto& nodes = lookup(by_id, p.id, a.patient_graphs);
      sets.emplace_back(nodes.begin(), nodes.end());
    }
    report.inclusion_rate = inclusion_rate(sets, truths);
  }
  ctx.out << report_table(report);

  if (!a.out.empty()) {
    write_lines(a.out, {report_json(report)});
    RunManifest m;
    m.command = "evaluate";
    m.config = {{"ks", a.ks}, {"ties", a.worst_case ? "worst_case" : "by_id"}};
    m.tool_version = tool_version();
    add_input(m, a.nodes);
    add_input(m, a.edges);
    add_input(m, a.truth);
    if (!a.predictions.empty()) add_input(m, a.predictions);
    if (!a.patient_graphs.empty()) add_input(m, a.patient_graphs);
    add_output(m, a.out);
    m.wall_clock_seconds = clock.seconds();
    write_manifest(m, manifest_path_for(a.out));
  }
  return 0;
}

struct FuseArgs {
  std::string nodes, edges, scores, patient_graphs, out, truth, report;
  double delta = 0.6;
  std::string ks = "1,5,10";
};

int cmd_fuse(const FuseArgs& a, const Context& ctx) {
  Stopwatch clock;
  if (!(a.delta >= 0.0)) throw ConfigError("--delta must be >= 0");
  const std::vector<Index> ks = parse_ks(a.ks);
  const KnowledgeGraph g = load_graph(a.nodes, a.edges);
  const auto graphs = read_patient_graphs(a.patient_graphs, g, "genes");

  std::map<std::string, std::map<NodeId, double>> external;
  std::vector<std::string> order;
  for (const ojson& row : read_jsonl(a.scores)) {
    const std::string id = row["id"].get<std::string>();
    std::map<NodeId, double> raw;
    for (const auto& [key, value] : row.at("scores").items()) {
      raw[gene_id(g, key, a.scores)] = value.get<double>();
    }
    if (!external.emplace(id, std::move(raw)).second) {
      throw std::runtime_error(a.scores + ": patient " + id + " listed twice");
    }
    order.push_back(id);
  }
  for (const auto& [id, genes] : graphs) {
    if (!external.contains(id)) {
      throw std::runtime_error("external score file has no entry for patient " + id);
    }
  }

  std::map<std::string, Ranking> base;
  std::map<std::string, Ranking> fused;
  std::vector<std::string> lines;
  for (const std::string& id : order) {
    const auto& raw = external.at(id);
    const auto& boosted = lookup(graphs, id, a.patient_graphs);
    std::map<NodeId, double> normalized;
    if (!raw.empty()) normalized = min_max_normalize(raw);
    std::vector<NodeId> missing;
    std::vector<ScoredGene> ranked = fuse_scores(normalized, boosted, a.delta, &missing);
    for (NodeId gm : missing) {
      ctx.warn("patient " + id + ": gene " + g.key(gm) +
               " lacks an external score; boosted from 0");
    }
    base.emplace(id, rank_genes(normalized));
    ojson j;
    j["id"] = id;
    ojson ranking = ojson::array();
    for (const ScoredGene& e : ranked) {
      ranking.push_back({{"gene", g.key(e.gene)}, {"score", e.score}});
    }
    j["ranking"] = std::move(ranking);
    lines.push_back(j.dump());
    fused.emplace(id, Ranking(std::move(ranked)));
  }
  write_lines(a.out, lines);

  RunManifest m;
  m.command = "fuse";
  m.config = {{"delta", fmt("%.17g", a.delta)}, {"ks", a.ks}};
  m.tool_version = tool_version();
  add_input(m, a.nodes);
  add_input(m, a.edges);
  add_input(m, a.scores);
  add_input(m, a.patient_graphs);
  add_output(m, a.out);

  if (!a.truth.empty()) {
    const auto truth = load_patients(a.truth, g, ctx);
    std::vector<std::optional<NodeId>> truths;
    std::vector<Ranking> rb, rf;
    for (const auto& p : truth) {
      truths.push_back(p.causal_gene);
      rb.push_back(lookup(base, p.id, a.scores));
      rf.push_back(lookup(fused, p.id, a.scores));
    }
    const MetricReport before = ranking_report(rb, truths, ks);
    const MetricReport after = ranking_report(rf, truths, ks);
    ctx.out << "external\n" << report_table(before) << "fused (delta "
            << fmt("%.3g", a.delta) << ")\n" << report_table(after);
    add_input(m, a.truth);
    if (!a.report.empty()) {
      ojson j;
      j["external"] = ojson::parse(report_json(before));
      j["fused"] = ojson::parse(report_json(after));
      write_lines(a.report, {j.dump(2)});
      add_output(m, a.report);
    }
  }
  m.wall_clock_seconds = clock.seconds();
  write_manifest(m, manifest_path_for(a.out));
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phenotype-driven gene prioritization over a knowledge graph", "rarenet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());
  Context ctx{out, err};
  std::function<int()> action;

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic graph and cohort");
  synth->add_option("--config", sa.config, "Synth config (key = value)")->required()
      ->check(CLI::ExistingFile);
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--seed", sa.seed, "Override the config seed");
  synth->callback([&] { action = [&] { return cmd_synth(sa, ctx); }; });

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "Load and validate graph and cohort files");
  ingest->add_option("--nodes", ia.nodes, "Node TSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--edges", ia.edges, "Edge TSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--cohort", ia.cohorts, "Cohort JSONL (repeatable)")
      ->check(CLI::ExistingFile);
  ingest->add_flag("--check", ia.check, "Only report ok / error");
  ingest->callback([&] { action = [&] { return cmd_ingest(ia, ctx); }; });

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a model and write a checkpoint");
  trn->add_option("--nodes", ta.nodes, "Node TSV")->required()->check(CLI::ExistingFile);
  trn->add_option("--edges", ta.edges, "Edge TSV")->required()->check(CLI::ExistingFile);
  trn->add_option("--cohort", ta.cohort, "Training cohort JSONL")->required()
      ->check(CLI::ExistingFile);
  trn->add_option("--out", ta.out, "Checkpoint path")->required();
  trn->add_option("--config", ta.config, "Training config (key = value)")
      ->check(CLI::ExistingFile);
  trn->add_option("--set", ta.sets, "Config override key=value (repeatable)");
  trn->add_option("--epochs", ta.epochs, "Total epochs");
  trn->add_option("--seed", ta.seed, "Random seed");
  trn->add_option("--resume", ta.resume, "Continue from this checkpoint")
      ->check(CLI::ExistingFile);
  trn->add_option("--trace", ta.trace, "Loss trace CSV (default <out>.trace.csv)");
  trn->add_flag("--quiet", ta.quiet, "No per-epoch lines");
  trn->callback([&] { action = [&] { return cmd_train(ta, ctx); }; });

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Rank candidate genes per patient");
  pred->add_option("--checkpoint", pa.checkpoint, "Checkpoint")->required()
      ->check(CLI::ExistingFile);
  pred->add_option("--nodes", pa.nodes, "Node TSV")->required()->check(CLI::ExistingFile);
  pred->add_option("--edges", pa.edges, "Edge TSV")->required()->check(CLI::ExistingFile);
  pred->add_option("--patients", pa.patients, "Patient JSONL")->required()
      ->check(CLI::ExistingFile);
  pred->add_option("--out", pa.out, "Ranking JSONL")->required();
  pred->add_option("--jobs", pa.jobs, "Worker threads")->check(CLI::PositiveNumber);
  pred->add_option("--hops", pa.hops, "Sampling radius (default: as trained)")
      ->check(CLI::PositiveNumber);
  pred->add_option("--top", pa.top, "Keep only the best N genes (0 keeps all)")
      ->check(CLI::NonNegativeNumber);
  pred->callback([&] { action = [&] { return cmd_predict(pa, ctx); }; });

  ExtractArgs ea;
  auto* ext = app.add_subcommand("extract", "Extract per-patient explanation graphs");
  ext->add_option("--checkpoint", ea.checkpoint, "Checkpoint")->required()
      ->check(CLI::ExistingFile);
  ext->add_option("--nodes", ea.nodes, "Node TSV")->required()->check(CLI::ExistingFile);
  ext->add_option("--edges", ea.edges, "Edge TSV")->required()->check(CLI::ExistingFile);
  ext->add_option("--patients", ea.patients, "Patient JSONL")->required()
      ->check(CLI::ExistingFile);
  ext->add_option("--out", ea.out, "Patient-graph JSONL")->required();
  ext->add_option("--config", ea.config, "Extraction config (key = value)")
      ->check(CLI::ExistingFile);
  ext->add_option("--set", ea.sets, "Config override key=value (repeatable)");
  ext->add_option("--gene-threshold", ea.gene_threshold, "Minimum gene score");
  ext->add_option("--edge-percentile", ea.edge_percentile, "Edge threshold percentile");
  ext->add_option("--dot-dir", ea.dot_dir, "Also write one DOT file per patient here");
  ext->add_option("--jobs", ea.jobs, "Worker threads")->check(CLI::PositiveNumber);
  ext->callback([&] { action = [&] { return cmd_extract(ea, ctx); }; });

  EvaluateArgs va;
  auto* evl = app.add_subcommand("evaluate", "Hit@k, MRR and inclusion rate");
  evl->add_option("--nodes", va.nodes, "Node TSV")->required()->check(CLI::ExistingFile);
  evl->add_option("--edges", va.edges, "Edge TSV")->required()->check(CLI::ExistingFile);
  evl->add_option("--truth", va.truth, "Cohort JSONL with causal genes")->required()
      ->check(CLI::ExistingFile);
  evl->add_option("--predictions", va.predictions, "Ranking JSONL")
      ->check(CLI::ExistingFile);
  evl->add_option("--patient-graphs", va.patient_graphs, "Patient-graph JSONL")
      ->check(CLI::ExistingFile);
  evl->add_option("--ks", va.ks, "Comma-separated cut-offs")->capture_default_str();
  evl->add_flag("--worst-case-ties", va.worst_case, "Rank the truth last among ties");
  evl->add_option("--out", va.out, "Report JSON");
  evl->callback([&] { action = [&] { return cmd_evaluate(va, ctx); }; });

  FuseArgs fa;
  auto* fus = app.add_subcommand("fuse", "Boost external scores of extracted genes");
  fus->add_option("--nodes", fa.nodes, "Node TSV")->required()->check(CLI::ExistingFile);
  fus->add_option("--edges", fa.edges, "Edge TSV")->required()->check(CLI::ExistingFile);
  fus->add_option("--scores", fa.scores, "External score JSONL")->required()
      ->check(CLI::ExistingFile);
  fus->add_option("--patient-graphs", fa.patient_graphs, "Patient-graph JSONL")->required()
      ->check(CLI::ExistingFile);
  fus->add_option("--out", fa.out, "Fused ranking JSONL")->required();
  fus->add_option("--delta", fa.delta, "Boost for extracted genes")->capture_default_str();
  fus->add_option("--truth", fa.truth, "Cohort JSONL for before/after metrics")
      ->check(CLI::ExistingFile);
  fus->add_option("--report", fa.report, "Before/after report JSON (needs --truth)");
  fus->add_option("--ks", fa.ks, "Comma-separated cut-offs")->capture_default_str();
  fus->callback([&] { action = [&] { return cmd_fuse(fa, ctx); }; });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    return action();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rarenet
