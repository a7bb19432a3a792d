#include <doctest.h>

#include "jsee/common.hpp"
#include "jsee/nesting.hpp"
#include "jsee/scorer.hpp"
#include "jsee/synthetic.hpp"
#include "support.hpp"

using namespace jsee;

namespace {

Corpus figures(SpanVariant v) { return select_span_variant(figure_corpus(), v); }

}  // namespace

TEST_CASE("nesting counts on the fig1 and fig2 sentences") {
  const Corpus full = figures(SpanVariant::Full);
  const NestingReport f1 = count_nesting(full.sentences[0]);
  CHECK(f1.trg_trg == 2);  // buy/buy, made/made
  CHECK(f1.ent_ent == 2);  // things... holds Canada and USA
  CHECK(f1.trg_ent == 2);  // both made triggers inside things...
  CHECK(f1.trg_trg_mentions == 4);
  CHECK(f1.trg_ent_mentions == 3);

  const NestingReport f2 = count_nesting(full.sentences[1]);
  CHECK(f2.trg_trg == 1);
  CHECK(f2.ent_ent == 1);
  CHECK(f2.trg_ent == 0);

  const NestingReport head = count_nesting(figures(SpanVariant::Head));
  CHECK(head.ent_ent == 0);
  CHECK(head.trg_ent == 0);
  CHECK(head.trg_trg == 3);
  CHECK(head.nested_sents == 2);
  CHECK(head.all_sents == 2);
}

TEST_CASE("identical and partial overlaps count as nested") {
  CHECK(spans_nested({1, 3}, {1, 3}));
  CHECK(spans_nested({1, 3}, {2, 5}));
  CHECK(spans_nested({0, 5}, {2, 3}));
  CHECK_FALSE(spans_nested({0, 2}, {2, 4}));
}

TEST_CASE("nesting matches the pairwise oracle and head spans never add nesting") {
  std::mt19937_64 rng(17);
  testing::RandomSentenceOptions opts;
  opts.head_rate = 0.6;
  for (int trial = 0; trial < 50; ++trial) {
    const Corpus raw = testing::random_corpus(rng, Ontology::ace05(), 8, opts);
    const Corpus full = select_span_variant(raw, SpanVariant::Full);
    const Corpus head = select_span_variant(raw, SpanVariant::Head);
    CHECK(count_nesting(full) == testing::all_pairs_nesting(full));
    CHECK(count_nesting(head) == testing::all_pairs_nesting(head));
    CHECK(count_nesting(head).ent_ent <= count_nesting(full).ent_ent);
    CHECK(count_nesting(head).trg_ent <= count_nesting(full).trg_ent);
  }
}

TEST_CASE("partition follows the nested predicate") {
  std::mt19937_64 rng(3);
  const Corpus c = testing::random_corpus(rng, Ontology::ace05(), 40);
  const auto [nested, flat] = partition_nested(c);
  CHECK(nested.sentences.size() + flat.sentences.size() == c.sentences.size());
  for (const auto& s : nested.sentences) CHECK(is_nested(s));
  for (const auto& s : flat.sentences) CHECK_FALSE(is_nested(s));
  CHECK(static_cast<std::int64_t>(nested.sentences.size()) == count_nesting(c).nested_sents);
}

TEST_CASE("scoring a corpus against itself is perfect") {
  const Corpus c = figures(SpanVariant::Full);
  const ScoreReport r = score(c.sentences, c.sentences);
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    CHECK(r.counts[m].f1() == doctest::Approx(1.0));
  }
  CHECK(r[Metric::TrgC].gold == 7);
  CHECK(r[Metric::ArgC].gold == 10);
}

TEST_CASE("hand-built scoring cases") {
  const Sentence gold = figures(SpanVariant::Full).sentences[0];

  SUBCASE("a double-tagged trigger needs both events") {
    Sentence pred = gold;
    // Drop the transfermoney event on "buy".
    pred.events.erase(pred.events.begin());
    REQUIRE(pred.events.front().type == "transaction.transferownership");
    const ScoreReport r = score_sentence(pred, gold);
    CHECK(r[Metric::TrgI].gold == 4);
    CHECK(r[Metric::TrgI].matched == 3);
    CHECK(r[Metric::TrgC].matched == 3);
    CHECK(r[Metric::TrgC].precision() == doctest::Approx(1.0));
    CHECK(r[Metric::TrgC].recall() == doctest::Approx(0.75));
  }
  SUBCASE("wrong role keeps Arg-I but not Arg-C") {
    Sentence pred = gold;
    pred.events[0].arguments[0].role = "recipient";
    const ScoreReport r = score_sentence(pred, gold);
    CHECK(r[Metric::ArgI].matched == r[Metric::ArgI].gold);
    CHECK(r[Metric::ArgC].matched == r[Metric::ArgC].gold - 1);
  }
  SUBCASE("argument under a misclassified event") {
    Sentence pred = gold;
    pred.events[0].type = "conflict.attack";
    const ScoreReport r = score_sentence(pred, gold);
    CHECK(r[Metric::TrgI].matched == 4);
    CHECK(r[Metric::TrgC].matched == 3);
    CHECK(r[Metric::ArgI].matched == r[Metric::ArgI].gold - 1);
  }
  SUBCASE("entity span errors propagate to relations and arguments") {
    Sentence pred = gold;
    for (auto& e : pred.entities) {
      if (e.type == "COM") e.span = {4, 5};
    }
    const ScoreReport r = score_sentence(pred, gold);
    CHECK(r[Metric::Entity].matched == 3);
    CHECK(r[Metric::ArgI].matched == r[Metric::ArgI].gold - 3);
  }
  SUBCASE("no predictions") {
    Sentence pred = gold;
    pred.entities.clear();
    pred.relations.clear();
    pred.events.clear();
    const ScoreReport r = score_sentence(pred, gold);
    CHECK(r[Metric::TrgC].precision() == 0.0);
    CHECK(r[Metric::TrgC].recall() == 0.0);
    CHECK(r[Metric::TrgC].f1() == 0.0);
  }
}

TEST_CASE("micro averaging pools counts") {
  MetricCounts a{10, 5, 5};
  MetricCounts b{2, 4, 1};
  a += b;
  CHECK(a.precision() == doctest::Approx(6.0 / 9.0));
  CHECK(a.recall() == doctest::Approx(6.0 / 12.0));
  CHECK(a.f1() == doctest::Approx(2.0 * 6.0 / 21.0));
}

TEST_CASE("scoring needs the same sentence ids") {
  const Corpus c = figures(SpanVariant::Full);
  std::vector<Sentence> pred = {c.sentences[0]};
  CHECK_THROWS_AS(score(pred, c.sentences), Error);
}

TEST_CASE("scorer agrees with exhaustive matching") {
  std::mt19937_64 rng(99);
  const Ontology o = testing::tiny_ontology();
  testing::RandomSentenceOptions opts;
  opts.max_tokens = 5;
  opts.max_entities = 4;
  opts.max_events = 3;
  opts.max_relations = 4;
  opts.max_arguments = 3;
  for (int i = 0; i < 200; ++i) {
    const Sentence gold = testing::random_sentence(rng, o, "p" + std::to_string(i), opts);
    const Sentence pred = i % 2 ? testing::mutate_sentence(rng, gold, o)
                                : testing::random_sentence(rng, o, gold.id, opts);
    if (pred.tokens.size() != gold.tokens.size()) continue;
    const ScoreReport got = score_sentence(pred, gold);
    const ScoreReport want = testing::brute_force_score(pred, gold);
    for (std::size_t m = 0; m < kMetricCount; ++m) CHECK(got.counts[m] == want.counts[m]);
  }
}

TEST_CASE("partitioned scores add up") {
  std::mt19937_64 rng(5);
  const Ontology o = Ontology::ace05();
  const Corpus gold = testing::random_corpus(rng, o, 30);
  std::vector<Sentence> pred;
  for (const auto& s : gold.sentences) pred.push_back(testing::mutate_sentence(rng, s, o));
  const ScoreReport all = score(pred, gold.sentences);
  auto parts = score_partitioned(pred, gold.sentences);
  ScoreReport sum = parts.nested;
  sum += parts.non_nested;
  for (std::size_t m = 0; m < kMetricCount; ++m) CHECK(sum.counts[m] == all.counts[m]);
}

TEST_CASE("event-only reports leave entities and relations out") {
  const Corpus c = figures(SpanVariant::Full);
  const ScoreReport r = score(c.sentences, c.sentences, false);
  const auto j = to_json(r);
  CHECK(j.at("Entity").is_null());
  CHECK(j.at("Relation").is_null());
  CHECK(j.at("Arg-C").at("f1") == 1.0);
}
