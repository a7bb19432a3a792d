#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "jsee/common.hpp"
#include "jsee/graph.hpp"
#include "jsee/synthetic.hpp"

namespace testing {

using namespace jsee;

std::string source_path(const std::string& relative) {
  return std::string(JSEE_SOURCE_DIR) + "/" + relative;
}

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

namespace {

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(v.size()) - 1))];
}

std::string random_word(std::mt19937_64& rng, const std::string& lang) {
  static const std::vector<std::string> han = {"人", "北", "京", "买", "车", "会", "见", "了", "的"};
  static const std::vector<std::string> accented = {"á", "é", "ñ", "ó", "ü"};
  std::string w;
  const int n = uniform(rng, 1, 5);
  for (int i = 0; i < n; ++i) {
    if (lang == "zh") {
      w += pick(rng, han);
    } else if (lang == "es" && chance(rng, 0.2)) {
      w += pick(rng, accented);
    } else {
      w += static_cast<char>('a' + uniform(rng, 0, 25));
    }
  }
  return w;
}

Span random_span(std::mt19937_64& rng, int tokens, int max_len) {
  const int start = uniform(rng, 0, tokens - 1);
  const int len = uniform(rng, 1, std::min(max_len, tokens - start));
  return {start, start + len};
}

}  // namespace

Sentence random_sentence(std::mt19937_64& rng, const Ontology& o, const std::string& id,
                         const RandomSentenceOptions& opts) {
  static const std::vector<std::string> langs = {"en", "zh", "es"};
  const std::string lang = pick(rng, langs);
  SentenceBuilder b(id, "doc-" + id, lang);
  const int n = uniform(rng, opts.min_tokens, opts.max_tokens);
  for (int i = 0; i < n; ++i) b.word(random_word(rng, lang));

  std::vector<std::string> entities;
  const int n_ent = uniform(rng, 0, opts.max_entities);
  for (int i = 0; i < n_ent; ++i) {
    const Span full = random_span(rng, n, 4);
    std::optional<Span> head;
    if (full.size() > 1 && chance(rng, opts.head_rate)) {
      const int h = uniform(rng, full.start, full.end - 1);
      head = Span{h, h + 1};
    }
    entities.push_back(b.entity(pick(rng, o.entity_types), full, head));
  }

  if (entities.size() >= 2) {
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < static_cast<int>(entities.size()); ++a) {
      for (int c = 0; c < static_cast<int>(entities.size()); ++c) {
        if (a != c) pairs.emplace_back(a, c);
      }
    }
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const int n_rel = uniform(rng, 0, std::min<int>(opts.max_relations, pairs.size()));
    for (int i = 0; i < n_rel; ++i) {
      b.relation(pick(rng, o.relation_types), entities[pairs[i].first],
                 entities[pairs[i].second]);
    }
  }

  std::vector<Span> triggers;
  int arg_budget = opts.max_arguments;
  const int n_ev = uniform(rng, 0, opts.max_events);
  for (int i = 0; i < n_ev; ++i) {
    Span trigger = !triggers.empty() && chance(rng, opts.double_tag_rate)
                       ? pick(rng, triggers)
                       : random_span(rng, n, 2);
    triggers.push_back(trigger);
    std::vector<std::string> fillers = entities;
    std::shuffle(fillers.begin(), fillers.end(), rng);
    const int n_args = uniform(rng, 0, std::min<int>({3, arg_budget, static_cast<int>(fillers.size())}));
    arg_budget -= n_args;
    std::vector<Argument> args;
    for (int k = 0; k < n_args; ++k) args.push_back({fillers[k], pick(rng, o.argument_roles)});
    b.event(pick(rng, o.event_types), trigger, std::move(args));
  }
  Sentence s = b.build();
  validate_sentence(s, o);
  return s;
}

Corpus random_corpus(std::mt19937_64& rng, const Ontology& o, int sentences,
                     const RandomSentenceOptions& opts) {
  Corpus c;
  c.ontology = o;
  for (int i = 0; i < sentences; ++i) {
    c.sentences.push_back(random_sentence(rng, o, "r" + std::to_string(i), opts));
  }
  return c;
}

Ontology tiny_ontology() {
  Ontology o;
  o.name = "tiny";
  o.event_types = {"attack", "meet"};
  o.argument_roles = {"agent", "place"};
  o.entity_types = {"PER", "GPE"};
  o.relation_types = {"near", "part"};
  o.validate();
  return o;
}

Sentence mutate_sentence(std::mt19937_64& rng, const Sentence& s, const Ontology& o) {
  Sentence m = s;
  const int n = static_cast<int>(s.tokens.size());
  auto shift = [&](Span sp) {
    if (chance(rng, 0.5) && sp.end < n) return Span{sp.start, sp.end + 1};
    if (sp.size() > 1) return Span{sp.start + 1, sp.end};
    return sp.start > 0 ? Span{sp.start - 1, sp.end} : sp;
  };
  std::set<std::string> dropped;
  std::vector<EntityMention> entities;
  for (auto e : m.entities) {
    if (chance(rng, 0.15)) {
      dropped.insert(e.id);
      continue;
    }
    if (chance(rng, 0.2)) e.type = pick(rng, o.entity_types);
    if (chance(rng, 0.15)) e.span = shift(e.span);
    entities.push_back(e);
  }
  if (chance(rng, 0.3)) {
    entities.push_back({m.id + "-extra", pick(rng, o.entity_types), random_span(rng, n, 3), {}});
  }
  m.entities = entities;

  std::vector<RelationMention> relations;
  for (auto r : m.relations) {
    if (dropped.count(r.arg1) || dropped.count(r.arg2) || chance(rng, 0.15)) continue;
    if (chance(rng, 0.2)) r.type = pick(rng, o.relation_types);
    relations.push_back(r);
  }
  m.relations = relations;

  std::vector<EventMention> events;
  for (auto ev : m.events) {
    if (chance(rng, 0.15)) continue;
    if (chance(rng, 0.2)) ev.type = pick(rng, o.event_types);
    if (chance(rng, 0.15)) ev.trigger = shift(ev.trigger);
    std::vector<Argument> args;
    for (auto a : ev.arguments) {
      if (dropped.count(a.entity) || chance(rng, 0.15)) continue;
      if (chance(rng, 0.2)) a.role = pick(rng, o.argument_roles);
      args.push_back(a);
    }
    ev.arguments = args;
    events.push_back(ev);
  }
  if (chance(rng, 0.3)) {
    // A duplicate of an existing event exercises one-to-one matching.
    if (!events.empty()) {
      EventMention dup = pick(rng, events);
      dup.id += "-dup";
      events.push_back(dup);
    }
  }
  m.events = events;
  canonicalize(m);
  validate_sentence(m, o);
  return m;
}

// ---- scorer oracle ----------------------------------------------------------------

std::int64_t brute_force_matches(const std::vector<std::string>& pred,
                                 const std::vector<std::string>& gold) {
  std::vector<bool> used(gold.size(), false);
  std::function<std::int64_t(std::size_t)> best = [&](std::size_t i) -> std::int64_t {
    if (i == pred.size()) return 0;
    std::int64_t result = best(i + 1);  // leave pred[i] unmatched
    for (std::size_t j = 0; j < gold.size(); ++j) {
      if (used[j] || gold[j] != pred[i]) continue;
      used[j] = true;
      result = std::max(result, 1 + best(i + 1));
      used[j] = false;
    }
    return result;
  };
  return best(0);
}

namespace {

std::string span_key(const Span& s) {
  return std::to_string(s.start) + ":" + std::to_string(s.end);
}

std::array<std::vector<std::string>, kMetricCount> metric_keys(const Sentence& s) {
  std::array<std::vector<std::string>, kMetricCount> keys;
  std::map<std::string, Span> spans;
  for (const auto& e : s.entities) {
    spans[e.id] = e.span;
    keys[static_cast<int>(Metric::Entity)].push_back(span_key(e.span) + "|" + e.type);
  }
  for (const auto& r : s.relations) {
    keys[static_cast<int>(Metric::Relation)].push_back(
        span_key(spans.at(r.arg1)) + "|" + span_key(spans.at(r.arg2)) + "|" + r.type);
  }
  for (const auto& ev : s.events) {
    keys[static_cast<int>(Metric::TrgI)].push_back(span_key(ev.trigger));
    keys[static_cast<int>(Metric::TrgC)].push_back(span_key(ev.trigger) + "|" + ev.type);
    for (const auto& a : ev.arguments) {
      const std::string base = ev.type + "|" + span_key(spans.at(a.entity));
      keys[static_cast<int>(Metric::ArgI)].push_back(base);
      keys[static_cast<int>(Metric::ArgC)].push_back(base + "|" + a.role);
    }
  }
  return keys;
}

}  // namespace

ScoreReport brute_force_score(const Sentence& pred, const Sentence& gold) {
  const auto p = metric_keys(pred);
  const auto g = metric_keys(gold);
  ScoreReport r;
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    r.counts[m].predicted = static_cast<std::int64_t>(p[m].size());
    r.counts[m].gold = static_cast<std::int64_t>(g[m].size());
    r.counts[m].matched = brute_force_matches(p[m], g[m]);
  }
  return r;
}

// ---- nesting oracle ---------------------------------------------------------------

NestingReport all_pairs_nesting(const Corpus& c) {
  auto overlap = [](const Span& a, const Span& b) {
    for (int i = a.start; i < a.end; ++i) {
      if (i >= b.start && i < b.end) return true;
    }
    return false;
  };
  NestingReport r;
  for (const auto& s : c.sentences) {
    std::int64_t tt = 0, ee = 0, te = 0;
    std::set<std::size_t> tt_m, ee_m, te_trg, te_ent;
    for (std::size_t i = 0; i < s.events.size(); ++i) {
      for (std::size_t j = 0; j < s.events.size(); ++j) {
        if (i < j && overlap(s.events[i].trigger, s.events[j].trigger)) {
          ++tt;
          tt_m.insert(i);
          tt_m.insert(j);
        }
      }
      for (std::size_t j = 0; j < s.entities.size(); ++j) {
        if (overlap(s.events[i].trigger, s.entities[j].span)) {
          ++te;
          te_trg.insert(i);
          te_ent.insert(j);
        }
      }
    }
    for (std::size_t i = 0; i < s.entities.size(); ++i) {
      for (std::size_t j = i + 1; j < s.entities.size(); ++j) {
        if (overlap(s.entities[i].span, s.entities[j].span)) {
          ++ee;
          ee_m.insert(i);
          ee_m.insert(j);
        }
      }
    }
    r.trg_trg += tt;
    r.ent_ent += ee;
    r.trg_ent += te;
    r.trg_trg_mentions += static_cast<std::int64_t>(tt_m.size());
    r.ent_ent_mentions += static_cast<std::int64_t>(ee_m.size());
    r.trg_ent_mentions += static_cast<std::int64_t>(te_trg.size() + te_ent.size());
    r.nested_sents += (tt + ee + te) > 0 ? 1 : 0;
    r.all_sents += 1;
  }
  return r;
}

// ---- numeric helpers --------------------------------------------------------------

double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

double check_gradients(const std::vector<Matrix>& inputs,
                       const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                       std::uint64_t seed, double step) {
  // Probe the output shape once to draw the reduction weights.
  Matrix weights;
  {
    Tape t;
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(t.constant(m));
    const Matrix& out = build(t, vars).value();
    std::mt19937_64 rng(seed);
    weights = random_matrix(out.rows(), out.cols(), rng);
  }
  auto weighted = [&](const Matrix& out) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * weights.values()[i];
    return s;
  };

  Tape t;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(t.input(m));
  Var out = build(t, vars);
  Var flat = reshape(out, 1, out.value().size());
  Matrix w_col = weights;
  w_col.reshape(weights.size(), 1);
  Var loss = matmul(flat, t.constant(w_col));
  t.backward(loss);

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> numeric, analytic;
    const Matrix& g = t.grad(vars[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      std::vector<Matrix> plus = inputs, minus = inputs;
      plus[k].values()[i] += step;
      minus[k].values()[i] -= step;
      auto eval = [&](const std::vector<Matrix>& in) {
        Tape probe;
        std::vector<Var> v;
        for (const auto& m : in) v.push_back(probe.constant(m));
        return weighted(build(probe, v).value());
      };
      numeric.push_back((eval(plus) - eval(minus)) / (2.0 * step));
      analytic.push_back(g.empty() ? 0.0 : g.values()[i]);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

Matrix biaffine_loops(const Matrix& x1, const Matrix& x2, const Matrix& u, const Matrix& w,
                      const Matrix& bias, std::size_t K) {
  const std::size_t d1 = x1.cols(), d2 = x2.cols();
  Matrix out(x1.rows(), x2.rows() * K);
  for (std::size_t i = 0; i < x1.rows(); ++i) {
    for (std::size_t j = 0; j < x2.rows(); ++j) {
      for (std::size_t k = 0; k < K; ++k) {
        double v = 0.0;
        for (std::size_t a = 0; a < d1; ++a) {
          for (std::size_t b = 0; b < d2; ++b) v += x1(i, a) * u(a, k * d2 + b) * x2(j, b);
        }
        if (!w.empty()) {
          for (std::size_t a = 0; a < d1; ++a) v += w(k, a) * x1(i, a);
          for (std::size_t b = 0; b < d2; ++b) v += w(k, d1 + b) * x2(j, b);
        }
        if (!bias.empty()) v += bias(0, k);
        out(i, j * K + k) = v;
      }
    }
  }
  return out;
}

Matrix fnn_loops(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  Matrix out(x.rows(), weight.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < weight.cols(); ++j) {
      double v = bias(0, j);
      for (std::size_t k = 0; k < x.cols(); ++k) v += x(i, k) * weight(k, j);
      out(i, j) = gelu_ref(v);
    }
  }
  return out;
}

Matrix pool_loops(const EmbeddingBundle& b, const Matrix& layer_weights, const Matrix& score) {
  const std::size_t L = b.layer_count(), D = b.dim();
  std::vector<double> p(L);
  double z = 0.0;
  for (std::size_t l = 0; l < L; ++l) z += std::exp(layer_weights(0, l));
  for (std::size_t l = 0; l < L; ++l) p[l] = std::exp(layer_weights(0, l)) / z;
  Matrix out(b.token_count(), D);
  for (std::size_t t = 0; t < b.token_count(); ++t) {
    std::vector<std::vector<double>> vecs;
    std::vector<double> logits;
    for (int s : b.alignment[t]) {
      std::vector<double> v(D, 0.0);
      for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t c = 0; c < D; ++c) v[c] += p[l] * b.layers[l](s, c);
      }
      double a = 0.0;
      for (std::size_t c = 0; c < D; ++c) a += score(0, c) * v[c];
      vecs.push_back(v);
      logits.push_back(a);
    }
    double zz = 0.0;
    for (double a : logits) zz += std::exp(a);
    for (std::size_t k = 0; k < vecs.size(); ++k) {
      for (std::size_t c = 0; c < D; ++c) out(t, c) += std::exp(logits[k]) / zz * vecs[k][c];
    }
  }
  return out;
}

EmbeddingBundle random_bundle(std::mt19937_64& rng, std::size_t tokens, std::size_t layers,
                              std::size_t dim) {
  EmbeddingBundle b;
  b.sentence_id = "b";
  int next = 0;
  for (std::size_t t = 0; t < tokens; ++t) {
    const int pieces = 1 + static_cast<int>(rng() % 3);
    std::vector<int> subs;
    for (int p = 0; p < pieces; ++p) subs.push_back(next++);
    b.alignment.push_back(subs);
  }
  for (std::size_t l = 0; l < layers; ++l) b.layers.push_back(random_matrix(next, dim, rng));
  return b;
}

ParserOutput random_parser_output(std::mt19937_64& rng, const LabelSpace& labels,
                                  std::size_t tokens, std::size_t query_length, double scale) {
  const std::size_t q = tokens * query_length;
  ParserOutput out;
  out.node_label_logits = random_matrix(q, labels.node_classes.size(), rng, scale);
  out.anchor_logits = random_matrix(q, tokens, rng, scale);
  out.query_to_node.assign(q, -1);
  for (std::size_t i = 0; i < q; ++i) {
    const auto row = out.node_label_logits.row(i);
    if (std::max_element(row.begin(), row.end()) - row.begin() != LabelSpace::kNullClass) {
      out.node_queries.push_back(static_cast<int>(i));
      out.query_to_node[i] = static_cast<int>(out.node_queries.size());
    }
  }
  const std::size_t n = out.node_queries.size() + 1;
  out.edge_presence_logits = random_matrix(n, n, rng, scale);
  out.edge_label_logits = random_matrix(n, n * labels.edge_labels.size(), rng, scale);
  return out;
}

ParserConfig tiny_parser_config() {
  ParserConfig c;
  c.query_length = 2;
  c.n_transformer_layers = 1;
  c.hidden_size = 8;
  c.n_heads = 2;
  c.ffn_size = 12;
  c.hidden_size_anchor = 6;
  c.hidden_size_edge_label = 6;
  c.hidden_size_edge_presence = 5;
  c.init_seed = 3;
  return c;
}

Sentence three_token_sentence() {
  SentenceBuilder b("tiny", "tiny", "en");
  const Span ann = b.word("Ann");
  const Span hit = b.word("hit");
  const Span bob = b.word("Bob");
  const auto e_ann = b.entity("PER", ann);
  const auto e_bob = b.entity("PER", bob);
  b.relation("personalsocial", e_ann, e_bob);
  b.event("conflict.attack", hit, {{e_ann, "attacker"}, {e_bob, "target"}});
  return b.build();
}

double end_to_end_gradient_error(std::uint64_t seed, int probes) {
  const Sentence s = three_token_sentence();
  const ParserConfig c = tiny_parser_config();
  Parser p(c, Ontology::rich_ere(), 2, 6);
  HashEmbeddingOptions ho;
  ho.layers = 2;
  ho.dim = 6;
  const EmbeddingBundle b = HashEmbeddingProvider(ho).embed(s);
  const TargetAssignment tg = assign_targets(encode(s), s.tokens.size(), c.query_length, p.labels());

  std::vector<Matrix> grads = p.params().zero_grads();
  sentence_loss(p, b, tg, &grads, nullptr);

  std::mt19937_64 rng(seed);
  std::vector<double> analytic[2], numeric[2];
  const double h = 1e-5;
  for (std::size_t i = 0; i < p.params().size(); ++i) {
    Matrix& w = p.params()[i].value;
    const int g = p.params()[i].group == ParamGroup::Encoder ? 0 : 1;
    for (int probe = 0; probe < probes; ++probe) {
      const std::size_t k = rng() % w.size();
      const double keep = w.values()[k];
      w.values()[k] = keep + h;
      const double up = sentence_loss(p, b, tg, nullptr, nullptr).total();
      w.values()[k] = keep - h;
      const double down = sentence_loss(p, b, tg, nullptr, nullptr).total();
      w.values()[k] = keep;
      numeric[g].push_back((up - down) / (2 * h));
      analytic[g].push_back(grads[i].values()[k]);
    }
  }
  if (analytic[0].empty() || analytic[1].empty()) throw Error("a parameter group is empty");
  return std::max(relative_error(analytic[0], numeric[0]), relative_error(analytic[1], numeric[1]));
}

TrainConfig overfit_config(std::uint64_t seed) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = 200;
  c.warmup_steps = 100;
  c.decoder_learning_rate = 1e-3;
  c.encoder_learning_rate = 4e-5;
  c.parser.hidden_size = 64;
  c.parser.n_heads = 4;
  c.parser.ffn_size = 128;
  c.parser.hidden_size_anchor = 64;
  c.parser.hidden_size_edge_label = 64;
  c.parser.hidden_size_edge_presence = 64;
  c.parser.init_seed = seed;
  return c;
}

}  // namespace testing
