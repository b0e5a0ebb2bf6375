#include "doctest.h"
#include "helpers.hpp"

#include "rarenet/cohort.hpp"
#include "rarenet/config.hpp"
#include "rarenet/hashing.hpp"
#include "rarenet/settings.hpp"

using namespace rarenet;

TEST_CASE("key-value documents") {
  const KeyValues kv = KeyValues::parse("# c\n a = 1 \n\nb=x y\nflag = true\n");
  std::int64_t a = 0;
  std::string b;
  bool flag = false;
  double untouched = 4.5;
  kv.read("a", a);
  kv.read("b", b);
  kv.read("flag", flag);
  kv.read("missing", untouched);
  CHECK(a == 1);
  CHECK(b == "x y");
  CHECK(flag);
  CHECK(untouched == 4.5);
  CHECK_THROWS_AS(KeyValues::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValues::parse("just text\n"), ConfigError);
  try {
    (void)KeyValues::parse("a = 1\nbroken\n", "cfg.txt");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("cfg.txt") != std::string::npos);
    CHECK(std::string(e.what()).find('2') != std::string::npos);
  }
  int i = 0;
  CHECK_THROWS_AS(KeyValues::parse("a = 1.5\n").read("a", i), ConfigError);
  CHECK_THROWS_AS(KeyValues::parse("a = yes?\n").read("a", flag), ConfigError);
  CHECK_THROWS_AS(kv.reject_unknown({"a", "b"}), ConfigError);
  CHECK_NOTHROW(kv.reject_unknown({"a", "b", "flag"}));
}

TEST_CASE("training settings") {
  TrainingSettings s;
  apply_training_keys(KeyValues::parse("hidden_dim = 32\nheads = 2\nlearning_rate = 0.01\nmargin = 0.3\n"), s);
  CHECK(s.model.hidden_dim == 32);
  CHECK(s.train.learning_rate == 0.01);
  CHECK(s.loss.margin == 0.3);
  CHECK_THROWS_AS(apply_training_keys(KeyValues::parse("hidden = 3\n"), s), ConfigError);
  CHECK_THROWS_AS(apply_training_keys(KeyValues::parse("heads = 5\nmargin = 0.9\n"), s), ConfigError);
  CHECK(s.model.heads == 2);  // a rejected document changes nothing
  CHECK(s.loss.margin == 0.3);
  TrainingSettings t;
  apply_training_keys(KeyValues::parse(training_text(s)), t);
  CHECK(training_text(t) == training_text(s));
  for (const auto& k : training_keys()) CHECK(training_text(s).find(k + " = ") != std::string::npos);

  ExtractionConfig e;
  apply_extraction_keys(KeyValues::parse("gene_threshold = 0.9\nedge_top_k = 3\n"), e, 0.5);
  CHECK(e.gene_threshold == 0.9);
  CHECK(e.edge_top_k == 3);
  CHECK_THROWS_AS(apply_extraction_keys(KeyValues::parse("gene_threshold = 4\n"), e, 0.5), ConfigError);
}

TEST_CASE("SHA-256 known answers") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto dir = testing::temp_dir("sha");
  testing::write_file(dir / "f", "abc");
  CHECK(sha256_file(dir / "f") == sha256_hex("abc"));
}

TEST_CASE("cohort files") {
  const KnowledgeGraph g = testing::make_graph(
      {{"HP1", NodeType::Phenotype}, {"HP2", NodeType::Phenotype}, {"G1", NodeType::Gene},
       {"D1", NodeType::Disease}},
      {{"HP1", "D1"}, {"D1", "G1"}});
  const auto dir = testing::temp_dir("cohort");
  testing::write_file(dir / "c.jsonl",
                      "{\"id\":\"a\",\"phenotypes\":[\"HP1\",\"HPX\"],\"causal_gene\":\"G1\"}\n"
                      "\n"
                      "{\"id\":\"b\",\"phenotypes\":[\"HP2\"],\"causal_gene\":null}\n"
                      "{\"id\":\"c\",\"phenotypes\":[\"HP1\"],\"causal_gene\":\"G9\"}\n");
  std::vector<std::string> warnings;
  const auto ps = load_cohort(dir / "c.jsonl", g, &warnings);
  REQUIRE(ps.size() == 3);
  CHECK(ps[0].phenotypes == std::vector<NodeId>{0});
  CHECK(ps[0].causal_gene == NodeId{2});
  CHECK_FALSE(ps[1].causal_gene);
  CHECK_FALSE(ps[2].causal_gene);
  CHECK(ps[2].causal_gene_key == "G9");
  CHECK(warnings.size() == 2);

  write_cohort(dir / "out.jsonl", std::span(ps).subspan(0, 2), g);
  const auto back = load_cohort(dir / "out.jsonl", g);
  CHECK(back[0].phenotypes == ps[0].phenotypes);
  CHECK(back[0].causal_gene == ps[0].causal_gene);
  CHECK(cohort_line(ps[0], g) == "{\"id\":\"a\",\"phenotypes\":[\"HP1\"],\"causal_gene\":\"G1\"}");

  testing::write_file(dir / "bad.jsonl", "{\"id\":\"a\",\"phenotypes\":[\"HP1\"]}\n{oops\n");
  try {
    (void)load_cohort(dir / "bad.jsonl", g);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
  testing::write_file(dir / "dup.jsonl", "{\"id\":\"a\",\"phenotypes\":[]}\n{\"id\":\"a\",\"phenotypes\":[]}\n");
  CHECK_THROWS_AS(load_cohort(dir / "dup.jsonl", g), FormatError);
  testing::write_file(dir / "typ.jsonl", "{\"id\":\"a\",\"phenotypes\":[],\"causal_gene\":\"D1\"}\n");
  CHECK_THROWS_AS(load_cohort(dir / "typ.jsonl", g), FormatError);
}
