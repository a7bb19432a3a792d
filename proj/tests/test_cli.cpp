#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "jsee/common.hpp"
#include "jsee/corpus.hpp"
#include "jsee/synthetic.hpp"
#include "run_manifest.hpp"
#include "support.hpp"

using namespace jsee;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Scratch directory removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

int jsee_cli(const std::string& args, const TempDir& dir) {
  const std::string cmd =
      std::string(JSEE_CLI) + " " + args + " > " + (dir / "cli.log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json load(const std::string& path) { return json::parse(read_file(path)); }

std::string fixture(const std::string& name) {
  return testing::source_path("data/fixtures/" + name);
}

}  // namespace

TEST_CASE("convert round trips and writes a manifest") {
  TempDir d("jsee_cli_convert");
  REQUIRE(jsee_cli("convert --in " + fixture("figures.json") + " --out " + (d / "g.json") +
                       " --span-variant head",
                   d) == 0);
  REQUIRE(jsee_cli("convert --in " + (d / "g.json") + " --out " + (d / "a.json"), d) == 0);
  REQUIRE(jsee_cli("convert --in " + (d / "a.json") + " --out " + (d / "g2.json"), d) == 0);
  CHECK(read_file(d / "g.json") == read_file(d / "g2.json"));
  CHECK(read_file(d / "a.json") ==
        dump_canonical(select_span_variant(figure_corpus(), SpanVariant::Head)));

  bool org = false;
  const json graphs = load(d / "g.json");
  for (const auto& g : graphs.at("graphs")) {
    for (const auto& e : g.at("graph").at("edges")) org = org || e.at("label") == "orgaffiliation";
  }
  CHECK(org);

  const json m = load(d / "g.json.manifest.json");
  CHECK(m.at("command") == "convert");
  CHECK(m.at("exit_code") == 0);
  CHECK(m.at("outputs").at(0).at("sha1") == cli::git_blob_hash(read_file(d / "g.json")));
}

TEST_CASE("convert rejects an invalid graph") {
  TempDir d("jsee_cli_invalid");
  REQUIRE(jsee_cli("convert --in " + fixture("figures.json") + " --out " + (d / "g.json"), d) ==
          0);
  json g = load(d / "g.json");
  json& edges = g.at("graphs").at(0).at("graph").at("edges");
  json kept = json::array();
  for (const auto& e : edges) {
    if (e.at("src") != 0) kept.push_back(e);
  }
  edges = kept;
  write_file_atomic(d / "bad.json", g.dump());
  CHECK(jsee_cli("convert --in " + (d / "bad.json") + " --out " + (d / "a.json"), d) != 0);
  CHECK_FALSE(fs::exists(d / "a.json"));
  const json m = load(d / "a.json.manifest.json");
  CHECK(m.at("exit_code") == 1);
  CHECK(m.contains("error"));
}

TEST_CASE("stats and nesting reports") {
  TempDir d("jsee_cli_stats");
  REQUIRE(jsee_cli("stats --in " + fixture("empty_annotations.json") + " --out " + (d / "s.json"),
                   d) == 0);
  const json s = load(d / "s.json");
  CHECK(s.at("sents") == 1);
  CHECK(s.at("events") == 0);
  CHECK(s.at("entities") == 0);

  const std::string in = fixture("synthetic_50.json");
  REQUIRE(jsee_cli("nesting --in " + in + " --out " + (d / "h.json") + " --span-variant head", d) ==
          0);
  REQUIRE(jsee_cli("nesting --in " + in + " --out " + (d / "f.json") + " --span-variant full", d) ==
          0);
  const json h = load(d / "h.json"), f = load(d / "f.json");
  CHECK(h.at("ent_ent") <= f.at("ent_ent"));
  CHECK(h.at("trg_ent") <= f.at("trg_ent"));
  CHECK(h.at("trg_trg") == f.at("trg_trg"));
}

TEST_CASE("scoring gold against itself, with the nested split") {
  TempDir d("jsee_cli_score");
  const std::string gold = fixture("synthetic_50.json");
  REQUIRE(jsee_cli("convert --in " + gold + " --out " + (d / "g.json"), d) == 0);
  REQUIRE(jsee_cli("convert --in " + (d / "g.json") + " --out " + (d / "p.json"), d) == 0);
  REQUIRE(jsee_cli("score --pred " + (d / "p.json") + " --gold " + gold + " --out " +
                       (d / "r.json") + " --nested-split",
                   d) == 0);
  const json r = load(d / "r.json");
  for (const char* m : {"Entity", "Relation", "Trg-I", "Trg-C", "Arg-I", "Arg-C"}) {
    CHECK(r.at("all").at(m).at("f1") == 1.0);
    CHECK(r.at("nested").at(m).at("gold").get<int>() +
              r.at("non_nested").at(m).at("gold").get<int>() ==
          r.at("all").at(m).at("gold").get<int>());
  }

  REQUIRE(jsee_cli("score --pred " + (d / "p.json") + " --gold " + gold + " --out " +
                       (d / "e.json") + " --ablation no-ent-rel",
                   d) == 0);
  CHECK(load(d / "e.json").at("all").at("Entity").is_null());

  CHECK(jsee_cli("score --pred " + fixture("figures.json") + " --gold " + gold + " --out " +
                     (d / "x.json"),
                 d) != 0);
}

TEST_CASE("train, predict and score end to end") {
  TempDir d("jsee_cli_train");
  const json config = {{"epochs", 3},
                       {"batch_size", 8},
                       {"warmup_steps", 2},
                       {"decoder_learning_rate", 1e-3},
                       {"hidden_size", 16},
                       {"n_heads", 2},
                       {"ffn_size", 24},
                       {"n_transformer_layers", 1},
                       {"hidden_size_anchor", 8},
                       {"hidden_size_edge_label", 8},
                       {"hidden_size_edge_presence", 8},
                       {"hash_embedding", {{"dim", 8}, {"layers", 2}}}};
  write_file_atomic(d / "config.json", config.dump());
  const std::string corpus = fixture("synthetic_50.json");
  REQUIRE(jsee_cli("split --in " + corpus + " --out-dir " + (d / "split") + " --seed 3", d) == 0);
  REQUIRE(jsee_cli("train --config " + (d / "config.json") + " --train " + (d / "split/train.json") +
                       " --dev " + (d / "split/dev.json") + " --out " + (d / "model") +
                       " --seed 4",
                   d) == 0);
  CHECK(fs::exists(d / "model/best/params.bin"));
  CHECK(fs::exists(d / "model/train_log.jsonl"));
  const json tm = load(d / "model/manifest.json");
  CHECK(tm.at("seed") == 4);
  CHECK(tm.at("config") == (d / "config.json"));

  const std::string test = d / "split/test.json";
  REQUIRE(jsee_cli("predict --checkpoint " + (d / "model/best") + " --in " + test + " --out " +
                       (d / "p1.json"),
                   d) == 0);
  REQUIRE(jsee_cli("predict --checkpoint " + (d / "model/best") + " --in " + test + " --out " +
                       (d / "p2.json"),
                   d) == 0);
  CHECK(read_file(d / "p1.json") == read_file(d / "p2.json"));
  const Corpus pred = load_corpus(d / "p1.json", "");
  CHECK(pred.sentences.size() == load_corpus(test).sentences.size());

  REQUIRE(jsee_cli("score --pred " + (d / "p1.json") + " --gold " + test + " --out " +
                       (d / "r.json"),
                   d) == 0);
  const double f1 = load(d / "r.json").at("all").at("Arg-C").at("f1");
  CHECK(f1 >= 0.0);
  CHECK(f1 <= 1.0);
}

TEST_CASE("bad arguments fail cleanly") {
  TempDir d("jsee_cli_args");
  CHECK(jsee_cli("", d) != 0);
  CHECK(jsee_cli("stats --in " + (d / "missing.json") + " --out " + (d / "s.json"), d) != 0);
  CHECK(jsee_cli("train --config x --train y --out z --ablation everything", d) != 0);
  CHECK(jsee_cli("synth --out " + (d / "s.json") + " --langs fr", d) != 0);
}

TEST_CASE("git blob hashes") {
  CHECK(cli::git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(cli::git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}
