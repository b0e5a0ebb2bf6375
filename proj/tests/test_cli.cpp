#include "doctest.h"
#include "helpers.hpp"

#include "rarenet/cli.hpp"
#include "rarenet/hashing.hpp"

#include "json.hpp"

#include <set>
#include <sstream>

using namespace rarenet;
namespace fs = std::filesystem;
using testing::read_file;
using testing::write_file;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kSynth =
    "n_diseases = 4\ngenes_per_disease = 3\nphenos_per_disease = 4\n"
    "n_background_nodes = 30\nbackground_edge_prob = 0.03\n"
    "phenotypes_per_patient = 3\nn_patients = 24\nseed = 3\n";

const char* kTrain =
    "embed_dim = 8\nhidden_dim = 8\nout_dim = 6\nheads = 2\nlayers = 2\n"
    "attn_proj_dim = 3\nedge_mlp_hidden = 5\nlearning_rate = 0.01\n";

struct Dataset {
  fs::path dir;
  std::string nodes, edges, train, test, train_cfg;
};

Dataset make_dataset(const std::string& name) {
  Dataset d;
  d.dir = testing::temp_dir("cli_" + name);
  write_file(d.dir / "synth.cfg", kSynth);
  write_file(d.dir / "train.cfg", kTrain);
  const Run r = cli({"synth", "--config", (d.dir / "synth.cfg").string(), "--out", (d.dir / "data").string()});
  REQUIRE(r.code == 0);
  d.nodes = (d.dir / "data" / "nodes.tsv").string();
  d.edges = (d.dir / "data" / "edges.tsv").string();
  d.train = (d.dir / "data" / "train.jsonl").string();
  d.test = (d.dir / "data" / "test.jsonl").string();
  d.train_cfg = (d.dir / "train.cfg").string();
  return d;
}

std::vector<nlohmann::json> jsonl(const fs::path& p) {
  std::vector<nlohmann::json> out;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace

TEST_CASE("synth output validates and is reproducible") {
  const Dataset d = make_dataset("synth");
  const Run check = cli({"ingest", "--nodes", d.nodes, "--edges", d.edges, "--cohort", d.train,
                         "--cohort", d.test, "--check"});
  CHECK(check.code == 0);
  CHECK(check.out == "ok\n");

  const Run again = cli({"synth", "--config", (d.dir / "synth.cfg").string(), "--out", (d.dir / "again").string()});
  REQUIRE(again.code == 0);
  const RunManifest a = read_manifest(d.dir / "data" / "manifest.json");
  const RunManifest b = read_manifest(d.dir / "again" / "manifest.json");
  CHECK(a.outputs == b.outputs);
  CHECK(a.digest() == b.digest());
  CHECK(a.seed == std::optional<std::uint64_t>{3});
  CHECK(a.outputs.at("nodes.tsv") == sha256_file(d.nodes));

  const Run seeded = cli({"synth", "--config", (d.dir / "synth.cfg").string(), "--out",
                          (d.dir / "seeded").string(), "--seed", "4"});
  REQUIRE(seeded.code == 0);
  CHECK(read_manifest(d.dir / "seeded" / "manifest.json").outputs != a.outputs);
}

TEST_CASE("usage and configuration errors exit with 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"synth", "--bogus"}).code == 2);
  const fs::path dir = testing::temp_dir("cli_usage");
  write_file(dir / "bad.cfg", "n_diseases = -3\n");
  CHECK(cli({"synth", "--config", (dir / "bad.cfg").string(), "--out", (dir / "o").string()}).code == 2);
  write_file(dir / "unknown.cfg", "colour = blue\n");
  CHECK(cli({"synth", "--config", (dir / "unknown.cfg").string(), "--out", (dir / "o").string()}).code == 2);
}

TEST_CASE("help lists every flag") {
  const std::map<std::string, std::vector<std::string>> flags{
      {"synth", {"--config", "--out", "--seed"}},
      {"ingest", {"--nodes", "--edges", "--cohort", "--check"}},
      {"train", {"--nodes", "--edges", "--cohort", "--out", "--config", "--set", "--epochs",
                 "--seed", "--resume", "--trace", "--quiet"}},
      {"predict", {"--checkpoint", "--nodes", "--edges", "--patients", "--out", "--jobs", "--hops", "--top"}},
      {"extract", {"--checkpoint", "--nodes", "--edges", "--patients", "--out", "--config", "--set",
                   "--gene-threshold", "--edge-percentile", "--dot-dir", "--jobs"}},
      {"evaluate", {"--nodes", "--edges", "--truth", "--predictions", "--patient-graphs", "--ks",
                    "--worst-case-ties", "--out"}},
      {"fuse", {"--nodes", "--edges", "--scores", "--patient-graphs", "--out", "--delta", "--truth",
                "--report", "--ks"}},
  };
  for (const auto& [cmd, list] : flags) {
    const Run r = cli({cmd, "--help"});
    CHECK(r.code == 0);
    for (const auto& f : list) CHECK_MESSAGE(r.out.find(f) != std::string::npos, cmd << " " << f);
  }
}

TEST_CASE("train, predict, extract, evaluate, fuse") {
  const Dataset d = make_dataset("pipeline");
  const std::string ckpt = (d.dir / "model.ckpt").string();
  const Run tr = cli({"train", "--nodes", d.nodes, "--edges", d.edges, "--cohort", d.train,
                      "--config", d.train_cfg, "--epochs", "3", "--seed", "1", "--out", ckpt, "--quiet"});
  REQUIRE(tr.code == 0);
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(ckpt + ".manifest.json"));
  {
    std::istringstream csv(read_file(ckpt + ".trace.csv"));
    std::string line;
    int rows = -1;  // header
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 3);
  }

  SUBCASE("resume is bit-exact") {
    const std::string part = (d.dir / "part.ckpt").string();
    const std::string full = (d.dir / "full.ckpt").string();
    REQUIRE(cli({"train", "--nodes", d.nodes, "--edges", d.edges, "--cohort", d.train, "--config",
                 d.train_cfg, "--epochs", "1", "--seed", "1", "--out", part, "--quiet"}).code == 0);
    REQUIRE(cli({"train", "--nodes", d.nodes, "--edges", d.edges, "--cohort", d.train, "--config",
                 d.train_cfg, "--epochs", "3", "--seed", "1", "--resume", part, "--out", full,
                 "--quiet"}).code == 0);
    CHECK(read_file(full) == read_file(ckpt));
    std::istringstream csv(read_file(full + ".trace.csv"));
    std::string line;
    int rows = -1;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 3);
  }

  SUBCASE("unknown --set key") {
    CHECK(cli({"train", "--nodes", d.nodes, "--edges", d.edges, "--cohort", d.train, "--set",
               "no_such_key=1", "--out", (d.dir / "x.ckpt").string()}).code == 2);
  }

  SUBCASE("predict, evaluate, extract and fuse") {
    const std::string pred = (d.dir / "pred.jsonl").string();
    REQUIRE(cli({"predict", "--checkpoint", ckpt, "--nodes", d.nodes, "--edges", d.edges,
                 "--patients", d.test, "--out", pred}).code == 0);
    const std::string pred2 = (d.dir / "pred2.jsonl").string();
    REQUIRE(cli({"predict", "--checkpoint", ckpt, "--nodes", d.nodes, "--edges", d.edges,
                 "--patients", d.test, "--out", pred2, "--jobs", "3"}).code == 0);
    CHECK(read_file(pred) == read_file(pred2));

    // Each ranking is a permutation of the patient's candidate genes.
    const KnowledgeGraph g = load_graph(d.nodes, d.edges);
    const auto rows = jsonl(pred);
    const auto patients = jsonl(d.test);
    REQUIRE(rows.size() == patients.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(rows[i]["id"] == patients[i]["id"]);
      std::vector<NodeId> phen;
      for (const auto& k : patients[i]["phenotypes"]) phen.push_back(*g.find(k.get<std::string>()));
      const SampledSubgraph sg = sample_phenotype_subgraph(g, phen, 2);
      std::set<std::string> expect, got;
      for (LocalIndex gl : sg.gene_locals) expect.insert(g.key(sg.local_nodes[gl]));
      double prev = INFINITY;
      for (const auto& e : rows[i]["ranking"]) {
        got.insert(e["gene"].get<std::string>());
        CHECK(e["score"].get<double>() <= prev);
        prev = e["score"].get<double>();
      }
      CHECK(got == expect);
      CHECK(rows[i]["ranking"].size() == expect.size());
    }

    const std::string report = (d.dir / "report.json").string();
    const Run ev = cli({"evaluate", "--nodes", d.nodes, "--edges", d.edges, "--truth", d.test,
                        "--predictions", pred, "--out", report});
    REQUIRE(ev.code == 0);
    CHECK(ev.out.find("Hit@10") != std::string::npos);
    const auto rep = nlohmann::json::parse(read_file(report));
    CHECK(rep["n_patients"] == patients.size());
    CHECK(fs::exists(report + ".manifest.json"));

    const std::string graphs = (d.dir / "graphs.jsonl").string();
    const fs::path dots = d.dir / "dots";
    REQUIRE(cli({"extract", "--checkpoint", ckpt, "--nodes", d.nodes, "--edges", d.edges,
                 "--patients", d.test, "--out", graphs, "--dot-dir", dots.string(),
                 "--gene-threshold", "-1.5"}).code == 0);
    CHECK(jsonl(graphs).size() == patients.size());
    CHECK(std::distance(fs::directory_iterator(dots), fs::directory_iterator{}) ==
          static_cast<std::ptrdiff_t>(patients.size()));
    const Run inc = cli({"evaluate", "--nodes", d.nodes, "--edges", d.edges, "--truth", d.test,
                         "--patient-graphs", graphs});
    CHECK(inc.code == 0);
    CHECK(inc.out.find("Inclusion") != std::string::npos);

    // External scores: the model's own predictions serve as a stand-in.
    const std::string ext = (d.dir / "ext.jsonl").string();
    {
      std::string text;
      for (const auto& r : rows) {
        nlohmann::json j;
        j["id"] = r["id"];
        j["scores"] = nlohmann::json::object();
        for (const auto& e : r["ranking"]) j["scores"][e["gene"].get<std::string>()] = e["score"];
        text += j.dump() + "\n";
      }
      write_file(ext, text);
    }
    const std::string fused0 = (d.dir / "fused0.jsonl").string();
    const std::string rep0 = (d.dir / "fused0.json").string();
    REQUIRE(cli({"fuse", "--nodes", d.nodes, "--edges", d.edges, "--scores", ext,
                 "--patient-graphs", graphs, "--out", fused0, "--delta", "0", "--truth", d.test,
                 "--report", rep0}).code == 0);
    const auto r0 = nlohmann::json::parse(read_file(rep0));
    CHECK(r0["external"] == r0["fused"]);
    const auto f0 = jsonl(fused0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      REQUIRE(f0[i]["ranking"].size() == rows[i]["ranking"].size());
      for (std::size_t k = 0; k < rows[i]["ranking"].size(); ++k) {
        CHECK(f0[i]["ranking"][k]["gene"] == rows[i]["ranking"][k]["gene"]);
      }
    }

    // A patient missing from the score file is a hard error naming it.
    const std::string partial = (d.dir / "partial.jsonl").string();
    {
      std::istringstream in(read_file(ext));
      std::string first, rest, line;
      std::getline(in, first);
      while (std::getline(in, line)) rest += line + "\n";
      write_file(partial, rest);
    }
    const Run miss = cli({"fuse", "--nodes", d.nodes, "--edges", d.edges, "--scores", partial,
                          "--patient-graphs", graphs, "--out", (d.dir / "f.jsonl").string()});
    CHECK(miss.code == 1);
    CHECK(miss.err.find(rows[0]["id"].get<std::string>()) != std::string::npos);

    const Run miss_eval = cli({"evaluate", "--nodes", d.nodes, "--edges", d.edges, "--truth", d.test,
                               "--predictions", partial});
    CHECK(miss_eval.code == 1);
  }
}

TEST_CASE("patients without candidates get an empty ranking and a warning") {
  const Dataset d = make_dataset("empty");
  const std::string ckpt = (d.dir / "m.ckpt").string();
  REQUIRE(cli({"train", "--nodes", d.nodes, "--edges", d.edges, "--cohort", d.train, "--config",
               d.train_cfg, "--epochs", "1", "--out", ckpt, "--quiet"}).code == 0);
  // An unknown phenotype leaves nothing to rank.
  const std::string pts = (d.dir / "odd.jsonl").string();
  write_file(pts, "{\"id\":\"lonely\",\"phenotypes\":[\"NOT_A_NODE\"],\"causal_gene\":null}\n");
  const std::string out = (d.dir / "odd_pred.jsonl").string();
  const Run r = cli({"predict", "--checkpoint", ckpt, "--nodes", d.nodes, "--edges", d.edges,
                     "--patients", pts, "--out", out});
  CHECK(r.code == 0);
  CHECK(r.err.find("lonely") != std::string::npos);
  const auto rows = jsonl(out);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0]["ranking"].empty());
}
