#include <doctest.h>

#include <filesystem>
#include <set>

#include "jsee/common.hpp"
#include "jsee/corpus.hpp"
#include "jsee/synthetic.hpp"
#include "support.hpp"

using namespace jsee;
using json = nlohmann::json;

namespace {

json figure_json() { return json::parse(to_json(figure_corpus()).dump()); }

json& fig2(json& j) { return j["sentences"][1]; }

void expect_schema_error(const json& j, const std::string& sentence, const std::string& field) {
  try {
    corpus_from_json(j);
    FAIL("accepted an invalid corpus");
  } catch (const SchemaError& e) {
    CHECK(e.sentence_id() == sentence);
    CHECK(e.field().find(field) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("ontologies carry the expected inventory sizes") {
  const Ontology ace = Ontology::ace05();
  CHECK(ace.event_types.size() == 33);
  CHECK(ace.argument_roles.size() == 22);
  CHECK(ace.entity_types.size() == 7);
  CHECK(ace.relation_types.size() == 6);
  const Ontology ere = Ontology::rich_ere();
  CHECK(ere.event_types.size() == 18);
  CHECK(ere.argument_roles.size() == 18);
  CHECK(ere.entity_types.size() == 15);
  CHECK(ere.relation_types.size() == 6);
  CHECK_NOTHROW(ace.validate());
  CHECK_NOTHROW(ere.validate());
}

TEST_CASE("shipped ontology files match the built-in inventories") {
  CHECK(load_ontology(testing::source_path("data/ontologies/ace05.json")) == Ontology::ace05());
  CHECK(load_ontology(testing::source_path("data/ontologies/rich_ere.json")) ==
        Ontology::rich_ere());
}

TEST_CASE("ontology rejects an edge label used in two categories") {
  Ontology o = Ontology::ace05();
  o.relation_types.push_back(o.argument_roles.front());
  CHECK_THROWS_AS(o.validate(), SchemaError);
  Ontology t = Ontology::ace05();
  t.entity_types.push_back("trigger");
  CHECK_THROWS_AS(t.validate(), SchemaError);
}

TEST_CASE("json round trip is lossless and canonical dumps are stable") {
  const Corpus c = figure_corpus();
  const Corpus back = corpus_from_json(json::parse(dump_canonical(c)));
  CHECK(back.sentences == c.sentences);
  CHECK(back.ontology == c.ontology);
  CHECK(dump_canonical(back) == dump_canonical(c));
}

TEST_CASE("save and load through a file") {
  const auto dir = std::filesystem::temp_directory_path() / "jsee_corpus_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "c.json").string();
  std::mt19937_64 rng(5);
  const Corpus c = testing::random_corpus(rng, Ontology::rich_ere(), 20);
  save_corpus(c, path);
  CHECK(load_corpus(path).sentences == c.sentences);
  std::filesystem::remove_all(dir);
}

TEST_CASE("schema errors name the sentence and field") {
  SUBCASE("dangling argument") {
    json j = figure_json();
    fig2(j)["events"][0]["args"][0]["entity"] = "nope";
    expect_schema_error(j, "fig2", "events.fig2-V0");
  }
  SUBCASE("dangling relation argument") {
    json j = figure_json();
    fig2(j)["relations"][0]["arg2"] = "missing";
    expect_schema_error(j, "fig2", "relations.fig2-R0.arg2");
  }
  SUBCASE("head outside the mention") {
    json j = figure_json();
    fig2(j)["entities"][2]["head_start"] = 3;
    fig2(j)["entities"][2]["head_end"] = 4;
    expect_schema_error(j, "fig2", "entities.fig2-E2.head");
  }
  SUBCASE("span beyond the sentence") {
    json j = figure_json();
    fig2(j)["entities"][3]["end"] = 40;
    expect_schema_error(j, "fig2", "entities.fig2-E3");
  }
  SUBCASE("unknown event type") {
    json j = figure_json();
    fig2(j)["events"][2]["type"] = "life.party";
    expect_schema_error(j, "fig2", "events.fig2-V2.type");
  }
  SUBCASE("duplicate entity id") {
    json j = figure_json();
    fig2(j)["entities"][3]["id"] = "fig2-E2";
    expect_schema_error(j, "fig2", "entities.fig2-E2");
  }
  SUBCASE("one entity filling two roles of an event") {
    json j = figure_json();
    fig2(j)["events"][0]["args"].push_back({{"entity", "fig2-E3"}, {"role", "thing"}});
    expect_schema_error(j, "fig2", "events.fig2-V0.args");
  }
  SUBCASE("second relation over the same ordered pair") {
    json j = figure_json();
    fig2(j)["relations"].push_back(
        {{"id", "fig2-R9"}, {"type", "physical"}, {"arg1", "fig2-E0"}, {"arg2", "fig2-E1"}});
    expect_schema_error(j, "fig2", "relations.fig2-R9");
  }
  SUBCASE("unsupported language") {
    json j = figure_json();
    fig2(j)["lang"] = "fr";
    expect_schema_error(j, "fig2", "lang");
  }
}

TEST_CASE("schema version mismatch is rejected") {
  json j = figure_json();
  j["schema_version"] = "0.9";
  CHECK_THROWS_AS(corpus_from_json(j), SchemaError);
  CHECK_NOTHROW(corpus_from_json(j, ""));
}

TEST_CASE("span variant selection") {
  const Corpus c = figure_corpus();
  const Corpus head = select_span_variant(c, SpanVariant::Head);
  const Corpus full = select_span_variant(c, SpanVariant::Full);
  const Sentence& h2 = head.sentences[1];
  const Sentence& f2 = full.sentences[1];
  CHECK(h2.find_entity("fig2-E0")->span == Span{2, 3});
  CHECK(f2.find_entity("fig2-E0")->span == Span{0, 3});
  // No head annotated: both variants keep the full mention.
  CHECK(h2.find_entity("fig2-E3")->span == Span{13, 15});
  for (const auto& s : head.sentences) {
    for (const auto& e : s.entities) CHECK_FALSE(e.head.has_value());
  }
  CHECK(select_span_variant(head, SpanVariant::Head).sentences == head.sentences);
  CHECK_THROWS_AS(select_span_variant(head, SpanVariant::Full), Error);
}

TEST_CASE("document-level split is deterministic and exhaustive") {
  const Corpus c = make_synthetic_corpus({});
  const auto a = split_corpus(c, {0.6, 0.2, 0.2}, 3);
  const auto b = split_corpus(c, {0.6, 0.2, 0.2}, 3);
  std::size_t total = 0;
  std::set<std::string> seen_docs;
  for (int k = 0; k < 3; ++k) {
    CHECK(a[k].sentences == b[k].sentences);
    total += a[k].sentences.size();
    std::set<std::string> docs;
    for (const auto& s : a[k].sentences) docs.insert(s.doc_id);
    for (const auto& d : docs) CHECK(seen_docs.insert(d).second);
  }
  CHECK(total == c.sentences.size());
  CHECK(seen_docs.size() == 10);
  CHECK(a[0].split == SplitTag::Train);
  CHECK_THROWS_AS(split_corpus(c, {0.5, 0.2, 0.2}, 3), Error);
}

TEST_CASE("corpus statistics count mentions") {
  const CorpusStats s = corpus_stats(figure_corpus());
  CHECK(s.sentences == 2);
  CHECK(s.events == 7);
  CHECK(s.roles == 10);
  CHECK(s.entities == 8);
  CHECK(s.relations == 1);

  const Corpus empty = load_corpus(testing::source_path("data/fixtures/empty_annotations.json"));
  const CorpusStats e = corpus_stats(empty);
  CHECK(e.sentences == 1);
  CHECK(e.events + e.roles + e.entities + e.relations == 0);
}

TEST_CASE("random sentences are valid and canonical") {
  std::mt19937_64 rng(11);
  testing::RandomSentenceOptions opts;
  opts.head_rate = 0.5;
  for (int i = 0; i < 200; ++i) {
    Sentence s = testing::random_sentence(rng, Ontology::ace05(), "s", opts);
    Sentence c = s;
    canonicalize(c);
    CHECK(c == s);
  }
}
