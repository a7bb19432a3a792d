#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "jsee/common.hpp"
#include "jsee/embeddings.hpp"
#include "jsee/graph.hpp"
#include "jsee/synthetic.hpp"
#include "jsee/trainer.hpp"
#include "support.hpp"

using namespace jsee;

namespace {

HashEmbeddingOptions small_hash() {
  HashEmbeddingOptions o;
  o.layers = 2;
  o.dim = 6;
  return o;
}

Sentence full_spans(const Sentence& s) {
  Corpus c;
  c.ontology = Ontology::rich_ere();
  c.sentences = {s};
  return select_span_variant(c, SpanVariant::Full).sentences.front();
}

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.parser = testing::tiny_parser_config();
  c.batch_size = 4;
  c.epochs = 10;
  c.warmup_steps = 5;
  c.decoder_learning_rate = 3e-3;
  c.encoder_learning_rate = 1e-4;
  return c;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("leftmost-anchor slot assignment on fig1") {
  const Sentence s = full_spans(figure1_sentence());
  const IEGraph g = encode(s);
  const LabelSpace ls = LabelSpace::build(Ontology::rich_ere(), false);
  const TargetAssignment t = assign_targets(g, s.tokens.size(), 2, ls);
  // Nodes: 1 I, 2-3 buy, 4 things..., 5-6 made, 7 Canada, 8 USA.
  CHECK(t.node_slot == std::vector<int>{-1, 0, 6, 7, 8, 10, 11, 14, 18});
  CHECK(t.node_classes[6] == LabelSpace::kTriggerClass);
  CHECK(t.node_classes[7] == LabelSpace::kTriggerClass);
  CHECK(t.node_classes[1] == LabelSpace::kNullClass);
  CHECK(t.edge_queries == std::vector<int>{0, 6, 7, 8, 10, 11, 14, 18});
  for (int k = 0; k < 11; ++k) {
    CHECK(t.anchor_targets(8, k) == ((k >= 4 && k <= 9) ? 1.0 : 0.0));
    CHECK(t.anchor_mask(8, k) == 1.0);
    CHECK(t.anchor_mask(9, k) == 0.0);
  }
  CHECK(t.edge_presence(0, 2) == 1.0);
  CHECK(t.edge_presence(2, 1) == 1.0);
  CHECK(t.edge_mask(1, 0) == 0.0);  // nothing points at the root
  CHECK(t.edge_mask(3, 3) == 0.0);
  CHECK(t.edge_labels.size() == g.edges.size());
}

TEST_CASE("too few query slots for co-anchored nodes is an error") {
  const Sentence s = full_spans(figure1_sentence());
  const LabelSpace ls = LabelSpace::build(Ontology::rich_ere(), false);
  // One slot per token leaves the second "buy" trigger nowhere to go.
  try {
    assign_targets(encode(s), s.tokens.size(), 1, ls);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("fig1") != std::string::npos);
    CHECK(std::string(e.what()).find("query_length") != std::string::npos);
  }
}

TEST_CASE("uniform logits give the closed-form loss") {
  const Sentence s = testing::three_token_sentence();
  const IEGraph g = encode(s);
  const LabelSpace ls = LabelSpace::build(Ontology::rich_ere(), false);
  const TargetAssignment targets = assign_targets(g, 3, 2, ls);
  Tape t;
  const std::size_t N = g.nodes.size(), R = ls.edge_labels.size();
  NodeScores nodes{t.constant(Matrix(6, ls.node_classes.size())), t.constant(Matrix(6, 3))};
  EdgeScores edges{t.constant(Matrix(N, N)), t.constant(Matrix(N, N * R))};
  const LossVars l = compute_loss(t, nodes, edges, targets, ls);
  CHECK(l.parts.node_label == doctest::Approx(std::log(double(ls.node_classes.size()))));
  CHECK(l.parts.anchor == doctest::Approx(std::log(2.0)));
  CHECK(l.parts.edge_presence == doctest::Approx(std::log(2.0)));
  CHECK(l.parts.edge_label == doctest::Approx(std::log(double(R))));
  CHECK(l.total.value()(0, 0) == doctest::Approx(l.parts.total()));
}

TEST_CASE("loss parts match a direct computation") {
  std::mt19937_64 rng(4);
  const Sentence s = testing::three_token_sentence();
  const IEGraph g = encode(s);
  const LabelSpace ls = LabelSpace::build(Ontology::rich_ere(), false);
  const TargetAssignment tg = assign_targets(g, 3, 2, ls);
  const std::size_t N = g.nodes.size(), R = ls.edge_labels.size(), C = ls.node_classes.size();
  const Matrix nl = testing::random_matrix(6, C, rng), al = testing::random_matrix(6, 3, rng);
  const Matrix ep = testing::random_matrix(N, N, rng), el = testing::random_matrix(N, N * R, rng);
  Tape t;
  const LossVars l = compute_loss(t, {t.constant(nl), t.constant(al)},
                                  {t.constant(ep), t.constant(el)}, tg, ls);

  auto log_softmax_at = [](std::span<const double> v, std::size_t k) {
    double z = 0.0;
    for (double x : v) z += std::exp(x);
    return v[k] - std::log(z);
  };
  double node = 0.0;
  for (std::size_t q = 0; q < 6; ++q) node -= log_softmax_at(nl.row(q), tg.node_classes[q]);
  node /= 6.0;

  // Every gold node is anchored on exactly one query row.
  double anchor = 0.0, cells = 0.0;
  for (std::size_t q = 0; q < 6; ++q) {
    if (tg.slot_node[q] < 0) continue;
    const auto& a = g.nodes[tg.slot_node[q]].anchor;
    for (int k = 0; k < 3; ++k) {
      const bool on = std::find(a.begin(), a.end(), k) != a.end();
      anchor -= std::log(on ? sigmoid(al(q, k)) : 1.0 - sigmoid(al(q, k)));
      cells += 1.0;
    }
  }
  anchor /= cells;

  double presence = 0.0, pcells = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 1; j < N; ++j) {
      if (i == j) continue;
      const bool on = std::any_of(g.edges.begin(), g.edges.end(), [&](const GraphEdge& e) {
        return e.src == int(i) && e.dst == int(j);
      });
      presence -= std::log(on ? sigmoid(ep(i, j)) : 1.0 - sigmoid(ep(i, j)));
      pcells += 1.0;
    }
  }
  presence /= pcells;

  double label = 0.0;
  for (const auto& e : g.edges) {
    const auto row = el.row(e.src).subspan(std::size_t(e.dst) * R, R);
    label -= log_softmax_at(row, ls.edge_label_index(e.label));
  }
  label /= double(g.edges.size());

  CHECK(l.parts.node_label == doctest::Approx(node).epsilon(1e-12));
  CHECK(l.parts.anchor == doctest::Approx(anchor).epsilon(1e-12));
  CHECK(l.parts.edge_presence == doctest::Approx(presence).epsilon(1e-12));
  CHECK(l.parts.edge_label == doctest::Approx(label).epsilon(1e-12));
}

TEST_CASE("end-to-end loss gradient matches finite differences") {
  CHECK(testing::end_to_end_gradient_error() < 1e-3);
}

TEST_CASE("warmup then cosine schedule") {
  const WarmupCosine s{1e-3, 10, 110};
  CHECK(s(0) == 0.0);
  CHECK(s(5) == doctest::Approx(5e-4));
  CHECK(s(10) == doctest::Approx(1e-3));
  CHECK(s(60) == doctest::Approx(5e-4));
  CHECK(s(35) == doctest::Approx(1e-3 * 0.5 * (1 + std::cos(std::numbers::pi * 0.25))));
  CHECK(s(110) == doctest::Approx(0.0));
  CHECK(s(500) == doctest::Approx(0.0));
}

TEST_CASE("AdamW first step moves by the learning rate") {
  ParamStore store;
  store.add("enc", Matrix{{1.0, -2.0}}, ParamGroup::Encoder);
  store.add("dec", Matrix{{0.5}}, ParamGroup::Decoder);
  AdamW opt(store, 0.9, 0.98, 1e-8);
  std::vector<Matrix> g = {Matrix{{0.3, -4.0}}, Matrix{{2.0}}};
  opt.step(store, g, {0.1, 0.5}, {0.01, 0.0});
  // Bias-corrected moments give m / sqrt(v) = sign(g) on the first step.
  CHECK(store[0].value(0, 0) == doctest::Approx(1.0 - 0.1 * (1.0 + 0.5 * 1.0)));
  CHECK(store[0].value(0, 1) == doctest::Approx(-2.0 - 0.1 * (-1.0 + 0.5 * -2.0)));
  CHECK(store[1].value(0, 0) == doctest::Approx(0.5 - 0.01));
  CHECK(opt.steps() == 1);

  // Second step with the same gradient: still unit-sized, moments agree.
  opt.step(store, g, {0.1, 0.0}, {0.01, 0.0});
  CHECK(store[1].value(0, 0) == doctest::Approx(0.48).epsilon(1e-6));
}

TEST_CASE("train config defaults and json") {
  const TrainConfig d = train_config_from_json(nlohmann::json::object());
  CHECK(d.batch_size == 16);
  CHECK(d.beta_2 == 0.98);
  CHECK(d.decoder_learning_rate == 1e-4);
  CHECK(d.decoder_weight_decay == 1.2e-6);
  CHECK(d.encoder_learning_rate == 4e-6);
  CHECK(d.encoder_weight_decay == 0.1);
  CHECK(d.epochs == 110);
  CHECK(d.warmup_steps == 1000);
  CHECK(d.parser.query_length == 2);
  CHECK(d.parser.n_transformer_layers == 3);
  CHECK(d.parser.dropout_transformer == 0.25);
  CHECK(d.parser.dropout_transformer_attention == 0.1);
  CHECK(d.parser.hidden_size_anchor == 256);

  TrainConfig c = tiny_train_config();
  c.ablation_no_ent_rel = true;
  c.parser.event_only = true;
  c.target_matching = TargetMatching::Permutation;
  const TrainConfig back = train_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.parser.event_only);

  CHECK_THROWS_AS(train_config_from_json({{"batch_size", 0}}), Error);
  CHECK_THROWS_AS(train_config_from_json({{"target_matching", "hungarian"}}), Error);
}

TEST_CASE("training is reproducible and lowers the loss") {
  const Corpus corpus = select_span_variant(make_synthetic_corpus({7, 12}), SpanVariant::Full);
  const HashEmbeddingProvider provider(small_hash());
  const TrainConfig c = tiny_train_config();

  Parser a = make_parser(c, corpus.ontology, provider);
  const TrainResult ra = train(a, c, {corpus}, nullptr, provider);
  Parser b = make_parser(c, corpus.ontology, provider);
  const TrainResult rb = train(b, c, {corpus}, nullptr, provider);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    CHECK(a.params()[i].value == b.params()[i].value);
  }
  REQUIRE(ra.log.size() == 10);
  // Dropout makes single epochs noisy once the schedule has decayed.
  for (std::size_t e = 1; e < 6; ++e) {
    CHECK(ra.log[e].loss.total() < ra.log[e - 1].loss.total());
  }
  CHECK(ra.log.back().loss.total() < 0.9 * ra.log.front().loss.total());
  CHECK(ra.log.back().steps == 30);
  CHECK(ra.log.front().decoder_lr == doctest::Approx(3e-3 * 3.0 / 5.0));

  TrainConfig other = c;
  other.seed = 2;
  Parser d = make_parser(other, corpus.ontology, provider);
  train(d, other, {corpus}, nullptr, provider);
  bool differs = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    differs = differs || !(a.params()[i].value == d.params()[i].value);
  }
  CHECK(differs);
}

TEST_CASE("training writes checkpoints and a log") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "jsee_train_test";
  fs::remove_all(dir);
  const Corpus corpus = select_span_variant(make_synthetic_corpus({7, 6}), SpanVariant::Full);
  const HashEmbeddingProvider provider(small_hash());
  TrainConfig c = tiny_train_config();
  c.epochs = 3;
  Parser p = make_parser(c, corpus.ontology, provider);
  TrainOptions o;
  o.output_dir = dir.string();
  std::size_t calls = 0;
  o.on_epoch = [&](const EpochLog&) { ++calls; };
  const TrainResult r = train(p, c, {corpus}, &corpus, provider, o);
  CHECK(calls == 3);
  CHECK(r.best_epoch >= 1);
  CHECK(fs::exists(dir / "last" / "params.bin"));
  CHECK(fs::exists(dir / "best" / "config.json"));
  std::ifstream log(dir / "train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("dev"));
    ++lines;
  }
  CHECK(lines == 3);
  const LoadedCheckpoint best = load_checkpoint((dir / "best").string());
  CHECK(best.config.contains("training"));
  fs::remove_all(dir);
}

TEST_CASE("training rejects mixed ontologies and mismatched ablation") {
  const HashEmbeddingProvider provider(small_hash());
  const Corpus ere = select_span_variant(make_synthetic_corpus({7, 3}), SpanVariant::Full);
  Corpus ace = ere;
  ace.ontology = Ontology::ace05();
  ace.sentences.clear();
  const TrainConfig c = tiny_train_config();
  Parser p = make_parser(c, ere.ontology, provider);
  CHECK_THROWS_AS(train(p, c, {ere, ace}, nullptr, provider), Error);

  TrainConfig ablated = c;
  ablated.ablation_no_ent_rel = true;
  ablated.parser.event_only = true;
  CHECK_THROWS_AS(train(p, ablated, {ere}, nullptr, provider), Error);
}

TEST_CASE("event-only training uses reduced targets") {
  const HashEmbeddingProvider provider(small_hash());
  const Corpus corpus = select_span_variant(figure_corpus(), SpanVariant::Full);
  TrainConfig c = tiny_train_config();
  c.ablation_no_ent_rel = true;
  c.parser.event_only = true;
  c.epochs = 2;
  Parser p = make_parser(c, corpus.ontology, provider);
  CHECK(p.labels().event_only);
  CHECK_NOTHROW(train(p, c, {corpus}, nullptr, provider));
}

TEST_CASE("permutation matching only reorders a token's own slots") {
  std::mt19937_64 rng(6);
  const Sentence s = full_spans(figure1_sentence());
  const LabelSpace ls = LabelSpace::build(Ontology::rich_ere(), false);
  TargetAssignment t = assign_targets(encode(s), s.tokens.size(), 3, ls);
  const TargetAssignment before = t;
  permute_targets(t, testing::random_matrix(33, ls.node_classes.size(), rng),
                  testing::random_matrix(33, 11, rng));
  for (std::size_t n = 1; n < t.node_slot.size(); ++n) {
    CHECK(t.node_slot[n] / 3 == before.node_slot[n] / 3);
    CHECK(t.slot_node[t.node_slot[n]] == int(n));
    CHECK(t.edge_queries[n - 1] == t.node_slot[n]);
  }
  // A decisive preference moves the transferownership trigger to slot 0 of "buy".
  Matrix nl(33, ls.node_classes.size());
  Matrix al(33, 11);
  for (std::size_t q = 0; q < 33; ++q) nl(q, 0) = 4.0;
  nl(9, 1) = 8.0;
  nl(11, 1) = 8.0;
  al(9, 3) = al(11, 3) = 8.0;
  TargetAssignment u = before;
  permute_targets(u, nl, al);
  CHECK(u.slot_node[9] >= 0);
  CHECK(u.slot_node[11] >= 0);
  CHECK(u.slot_node[10] < 0);
}
