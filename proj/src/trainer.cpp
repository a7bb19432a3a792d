#include "jsee/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <numbers>
#include <numeric>

#include <omp.h>

#include "jsee/common.hpp"

namespace jsee {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

}  // namespace

std::string to_string(TargetMatching m) {
  return m == TargetMatching::Leftmost ? "leftmost" : "permutation";
}

TargetMatching parse_target_matching(const std::string& s) {
  if (s == "leftmost") return TargetMatching::Leftmost;
  if (s == "permutation") return TargetMatching::Permutation;
  throw Error("unknown target matching '" + s + "' (expected leftmost or permutation)");
}

// ---- config ----------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error("train config: batch_size must be positive");
  if (epochs == 0) throw Error("train config: epochs must be at least 1");
  for (double b : {beta_1, beta_2}) {
    if (!(b >= 0.0 && b < 1.0)) throw Error("train config: betas must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw Error("train config: epsilon must be positive");
  for (double v : {decoder_learning_rate, encoder_learning_rate, decoder_weight_decay,
                   encoder_weight_decay}) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error("train config: learning rates and weight decays must be non-negative");
    }
  }
  if (parser.event_only != ablation_no_ent_rel) {
    throw Error("train config: parser event_only must follow the no-ent-rel ablation flag");
  }
  parser.validate();
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["beta_1"] = c.beta_1;
  j["beta_2"] = c.beta_2;
  j["epsilon"] = c.epsilon;
  j["decoder_learning_rate"] = c.decoder_learning_rate;
  j["decoder_weight_decay"] = c.decoder_weight_decay;
  j["encoder_learning_rate"] = c.encoder_learning_rate;
  j["encoder_weight_decay"] = c.encoder_weight_decay;
  j["epochs"] = c.epochs;
  j["warmup_steps"] = c.warmup_steps;
  j["seed"] = c.seed;
  j["ablation_no_ent_rel"] = c.ablation_no_ent_rel;
  j["target_matching"] = to_string(c.target_matching);
  const auto parser = to_json(c.parser);
  for (auto& [k, v] : parser.items()) {
    if (k != "event_only") j[k] = v;
  }
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "beta_1", c.beta_1);
  get_if(j, "beta_2", c.beta_2);
  get_if(j, "epsilon", c.epsilon);
  get_if(j, "decoder_learning_rate", c.decoder_learning_rate);
  get_if(j, "decoder_weight_decay", c.decoder_weight_decay);
  get_if(j, "encoder_learning_rate", c.encoder_learning_rate);
  get_if(j, "encoder_weight_decay", c.encoder_weight_decay);
  get_if(j, "epochs", c.epochs);
  get_if(j, "warmup_steps", c.warmup_steps);
  get_if(j, "seed", c.seed);
  get_if(j, "ablation_no_ent_rel", c.ablation_no_ent_rel);
  if (j.contains("target_matching")) {
    c.target_matching = parse_target_matching(j.at("target_matching").get<std::string>());
  }
  nlohmann::json parser_part = j;
  parser_part["event_only"] = c.ablation_no_ent_rel;
  c.parser = parser_config_from_json(parser_part);
  c.validate();
  return c;
}

// ---- targets ---------------------------------------------------------------------

TargetAssignment assign_targets(const IEGraph& gold, std::size_t tokens, std::size_t query_length,
                                const LabelSpace& labels) {
  if (query_length == 0) throw Error("query_length must be positive");
  const std::size_t Q = tokens * query_length;
  const std::size_t N = gold.nodes.size();
  if (N == 0 || gold.nodes[0].kind != NodeKind::Root) {
    throw Error("sentence '" + gold.sentence_id + "': graph has no root");
  }

  TargetAssignment t;
  t.sentence_id = gold.sentence_id;
  t.tokens = tokens;
  t.query_length = query_length;
  t.slot_node.assign(Q, -1);
  t.node_slot.assign(N, -1);
  t.node_classes.assign(Q, LabelSpace::kNullClass);
  t.anchor_targets = Matrix(Q, tokens);
  t.anchor_mask = Matrix(Q, tokens);

  std::vector<int> order;
  for (std::size_t i = 1; i < N; ++i) {
    const auto& n = gold.nodes[i];
    if (n.id != static_cast<int>(i)) {
      throw Error("sentence '" + gold.sentence_id + "': node ids must equal their positions");
    }
    if (n.anchor.empty()) throw Error("sentence '" + gold.sentence_id + "': node without anchor");
    for (int a : n.anchor) {
      if (a < 0 || static_cast<std::size_t>(a) >= tokens) {
        throw Error("sentence '" + gold.sentence_id + "': anchor token " + std::to_string(a) +
                    " outside [0, " + std::to_string(tokens) + ")");
      }
    }
    order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    const auto& a = gold.nodes[x];
    const auto& b = gold.nodes[y];
    const int ka = a.kind == NodeKind::Trigger ? 0 : 1;
    const int kb = b.kind == NodeKind::Trigger ? 0 : 1;
    return std::tie(a.anchor.front(), a.anchor.back(), ka, a.label) <
           std::tie(b.anchor.front(), b.anchor.back(), kb, b.label);
  });

  for (int id : order) {
    const auto& node = gold.nodes[id];
    int slot = -1;
    for (int tok : node.anchor) {
      for (std::size_t s = 0; s < query_length && slot < 0; ++s) {
        const std::size_t q = static_cast<std::size_t>(tok) * query_length + s;
        if (t.slot_node[q] < 0) slot = static_cast<int>(q);
      }
      if (slot >= 0) break;
    }
    if (slot < 0) {
      throw Error("sentence '" + gold.sentence_id + "': no free query slot for node " +
                  std::to_string(id) + " (query_length " + std::to_string(query_length) +
                  " is too small for its co-anchored nodes)");
    }
    t.slot_node[slot] = id;
    t.node_slot[id] = slot;
    t.node_classes[slot] = labels.node_class(node);
    for (std::size_t k = 0; k < tokens; ++k) t.anchor_mask(slot, k) = 1.0;
    for (int a : node.anchor) t.anchor_targets(slot, a) = 1.0;
  }

  for (std::size_t i = 1; i < N; ++i) t.edge_queries.push_back(t.node_slot[i]);
  t.edge_presence = Matrix(N, N);
  t.edge_mask = Matrix(N, N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 1; j < N; ++j) {
      if (i != j) t.edge_mask(i, j) = 1.0;
    }
  }
  for (const auto& e : gold.edges) {
    t.edge_presence(e.src, e.dst) = 1.0;
    t.edge_labels.push_back({e.src, e.dst, labels.edge_label_index(e.label)});
  }
  return t;
}

void permute_targets(TargetAssignment& t, const Matrix& node_logits, const Matrix& anchor_logits) {
  const std::size_t ql = t.query_length;
  if (node_logits.rows() != t.slot_node.size() || anchor_logits.rows() != t.slot_node.size()) {
    throw Error("permute_targets: logits do not match the assignment");
  }
  // Cost of placing gold row `src` (taken from the current assignment) on query q.
  auto cost = [&](std::size_t src, std::size_t q) {
    const auto row = node_logits.row(q);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    double c = mx + std::log(z) - row[t.node_classes[src]];
    for (std::size_t k = 0; k < t.tokens; ++k) {
      c += (softplus(anchor_logits(q, k)) - t.anchor_targets(src, k) * anchor_logits(q, k)) /
           double(t.tokens);
    }
    return c;
  };

  for (std::size_t tok = 0; tok < t.tokens; ++tok) {
    const std::size_t base = tok * ql;
    std::vector<std::size_t> occupied;
    for (std::size_t s = 0; s < ql; ++s) {
      if (t.slot_node[base + s] >= 0) occupied.push_back(base + s);
    }
    if (occupied.empty()) continue;
    std::vector<std::size_t> perm(ql);
    std::iota(perm.begin(), perm.end(), base);
    std::vector<std::size_t> best = perm;
    double best_cost = 0.0;
    bool first = true;
    do {
      double c = 0.0;
      for (std::size_t k = 0; k < occupied.size(); ++k) c += cost(occupied[k], perm[k]);
      if (first || c < best_cost - 1e-12) {
        best_cost = c;
        best = perm;
        first = false;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));

    const TargetAssignment before = t;
    for (std::size_t s = 0; s < ql; ++s) {
      t.slot_node[base + s] = -1;
      t.node_classes[base + s] = LabelSpace::kNullClass;
      for (std::size_t k = 0; k < t.tokens; ++k) {
        t.anchor_targets(base + s, k) = 0.0;
        t.anchor_mask(base + s, k) = 0.0;
      }
    }
    for (std::size_t k = 0; k < occupied.size(); ++k) {
      const std::size_t src = occupied[k], dst = best[k];
      const int node = before.slot_node[src];
      t.slot_node[dst] = node;
      t.node_slot[node] = static_cast<int>(dst);
      t.node_classes[dst] = before.node_classes[src];
      for (std::size_t j = 0; j < t.tokens; ++j) {
        t.anchor_targets(dst, j) = before.anchor_targets(src, j);
        t.anchor_mask(dst, j) = before.anchor_mask(src, j);
      }
    }
  }
  for (std::size_t i = 1; i < t.node_slot.size(); ++i) t.edge_queries[i - 1] = t.node_slot[i];
}

// ---- loss ------------------------------------------------------------------------

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  node_label += o.node_label;
  anchor += o.anchor;
  edge_presence += o.edge_presence;
  edge_label += o.edge_label;
  return *this;
}

LossBreakdown& LossBreakdown::operator*=(double s) {
  node_label *= s;
  anchor *= s;
  edge_presence *= s;
  edge_label *= s;
  return *this;
}

nlohmann::ordered_json to_json(const LossBreakdown& l) {
  return {{"node_label", l.node_label},
          {"anchor", l.anchor},
          {"edge_presence", l.edge_presence},
          {"edge_label", l.edge_label},
          {"total", l.total()}};
}

LossVars compute_loss(Tape& t, const NodeScores& nodes, const EdgeScores& edges,
                      const TargetAssignment& targets, const LabelSpace& labels) {
  (void)t;
  Var node_part = cross_entropy(nodes.label_logits, targets.node_classes);
  Var anchor_part = bce_with_logits(nodes.anchor_logits, targets.anchor_targets, targets.anchor_mask);
  Var presence_part =
      bce_with_logits(edges.presence_logits, targets.edge_presence, targets.edge_mask);
  Var label_part =
      cell_cross_entropy(edges.label_logits, labels.edge_labels.size(), targets.edge_labels);
  LossVars out;
  out.total = sum_scalars({node_part, anchor_part, presence_part, label_part});
  out.parts.node_label = node_part.value()(0, 0);
  out.parts.anchor = anchor_part.value()(0, 0);
  out.parts.edge_presence = presence_part.value()(0, 0);
  out.parts.edge_label = label_part.value()(0, 0);
  return out;
}

LossBreakdown sentence_loss(const Parser& parser, const EmbeddingBundle& bundle,
                            TargetAssignment targets, std::vector<Matrix>* grads,
                            std::mt19937_64* dropout_rng, TargetMatching matching) {
  Tape t;
  t.training = dropout_rng != nullptr;
  t.rng = dropout_rng;
  Var e = parser.embed(t, bundle);
  Var h = parser.encode_queries(t, parser.make_queries(t, e));
  NodeScores nodes = parser.predict_nodes(t, h, e);
  if (matching == TargetMatching::Permutation) {
    permute_targets(targets, nodes.label_logits.value(), nodes.anchor_logits.value());
  }
  EdgeScores edges = parser.predict_edges(t, h, targets.edge_queries);
  LossVars loss = compute_loss(t, nodes, edges, targets, parser.labels());
  if (grads) t.backward(loss.total, grads);
  return loss.parts;
}

// ---- optimisation ----------------------------------------------------------------

double WarmupCosine::operator()(std::size_t step) const {
  if (step < warmup_steps) return peak * double(step) / double(warmup_steps);
  if (total_steps <= warmup_steps) return step == warmup_steps ? peak : 0.0;
  const double progress =
      std::min(1.0, double(step - warmup_steps) / double(total_steps - warmup_steps));
  return peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ParamStore& store, double beta_1, double beta_2, double epsilon)
    : beta_1_(beta_1), beta_2_(beta_2), epsilon_(epsilon), m_(store.zero_grads()),
      v_(store.zero_grads()) {}

void AdamW::step(ParamStore& store, const std::vector<Matrix>& grads, GroupSettings encoder,
                 GroupSettings decoder) {
  if (grads.size() != store.size()) throw Error("AdamW: gradient count mismatch");
  ++steps_;
  const double c1 = 1.0 - std::pow(beta_1_, double(steps_));
  const double c2 = 1.0 - std::pow(beta_2_, double(steps_));
  for (std::size_t p = 0; p < store.size(); ++p) {
    Parameter& param = store[p];
    const GroupSettings& g = param.group == ParamGroup::Encoder ? encoder : decoder;
    auto w = param.value.values();
    auto m = m_[p].values();
    auto v = v_[p].values();
    const auto grad = grads[p].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = beta_1_ * m[i] + (1.0 - beta_1_) * grad[i];
      v[i] = beta_2_ * v[i] + (1.0 - beta_2_) * grad[i] * grad[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + epsilon_);
      w[i] -= g.learning_rate * (update + g.weight_decay * w[i]);
    }
  }
}

// ---- training loop ---------------------------------------------------------------

nlohmann::ordered_json to_json(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["steps"] = e.steps;
  j["loss"] = to_json(e.loss);
  j["lr"] = {{"encoder", e.encoder_lr}, {"decoder", e.decoder_lr}};
  j["dev"] = e.dev ? to_json(*e.dev) : nlohmann::ordered_json(nullptr);
  j["best"] = e.best;
  j["seconds"] = e.seconds;
  return j;
}

Parser make_parser(const TrainConfig& config, const Ontology& ontology,
                   const EmbeddingProvider& provider) {
  ParserConfig pc = config.parser;
  pc.event_only = config.ablation_no_ent_rel;
  return Parser(pc, ontology, provider.layers(), provider.dim());
}

TrainResult train(Parser& parser, const TrainConfig& config, const std::vector<Corpus>& train,
                  const Corpus* dev, const EmbeddingProvider& provider,
                  const TrainOptions& options) {
  namespace fs = std::filesystem;
  config.validate();
  if (train.empty()) throw Error("no training corpora");
  for (const auto& c : train) {
    if (!(c.ontology == train.front().ontology)) {
      throw Error("ontology mismatch across training corpora: '" + train.front().ontology.name +
                  "' vs '" + c.ontology.name + "'");
    }
  }
  if (!(parser.ontology() == train.front().ontology)) {
    throw Error("parser ontology does not match the training corpora");
  }
  if (parser.config().event_only != config.ablation_no_ent_rel) {
    throw Error("parser was built without the configured ablation setting");
  }

  std::vector<const Sentence*> sentences;
  for (const auto& c : train) {
    for (const auto& s : c.sentences) sentences.push_back(&s);
  }
  if (sentences.empty()) throw Error("training corpora contain no sentences");

  // Targets and embeddings are fixed for the whole run.
  const std::size_t n = sentences.size();
  std::vector<EmbeddingBundle> bundles(n);
  std::vector<TargetAssignment> targets(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    try {
      const Sentence& s = *sentences[i];
      IEGraph g = encode(s);
      if (config.ablation_no_ent_rel) g = reduce_graph(g);
      targets[i] = assign_targets(g, s.tokens.size(), parser.config().query_length, parser.labels());
      bundles[i] = provider.embed(s);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const std::size_t batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;
  const WarmupCosine enc_schedule{config.encoder_learning_rate, config.warmup_steps, total_steps};
  const WarmupCosine dec_schedule{config.decoder_learning_rate, config.warmup_steps, total_steps};

  ParamStore& store = parser.params();
  AdamW optimizer(store, config.beta_1, config.beta_2, config.epsilon);
  const int threads = std::max(1, omp_get_max_threads());
  std::vector<std::vector<Matrix>> thread_grads(threads, store.zero_grads());
  std::vector<Matrix> grads = store.zero_grads();

  if (!options.output_dir.empty()) fs::create_directories(options.output_dir);
  const std::string log_path =
      options.output_dir.empty() ? "" : (fs::path(options.output_dir) / "train_log.jsonl").string();
  std::string log_text;

  TrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(mix(config.seed));

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    LossBreakdown epoch_loss;
    EpochLog entry;
    entry.epoch = epoch;

    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n, begin + config.batch_size);
      for (auto& tg : thread_grads) {
        for (auto& g : tg) g.fill(0.0);
      }
      std::vector<LossBreakdown> losses(end - begin);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(end - begin); ++k) {
        try {
          const std::size_t idx = order[begin + k];
          std::mt19937_64 rng(mix(mix(config.seed ^ mix(epoch)) ^ idx));
          losses[k] = sentence_loss(parser, bundles[idx], targets[idx],
                                    &thread_grads[omp_get_thread_num()], &rng,
                                    config.target_matching);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
      for (std::size_t k = 0; k < end - begin; ++k) {
        if (errors[k]) std::rethrow_exception(errors[k]);
        epoch_loss += losses[k];
      }
      const double inv = 1.0 / double(end - begin);
      for (std::size_t p = 0; p < grads.size(); ++p) {
        grads[p].fill(0.0);
        for (const auto& tg : thread_grads) grads[p] += tg[p];
        grads[p] *= inv;
      }
      const std::size_t step = optimizer.steps() + 1;
      entry.encoder_lr = enc_schedule(step);
      entry.decoder_lr = dec_schedule(step);
      optimizer.step(store, grads, {entry.encoder_lr, config.encoder_weight_decay},
                     {entry.decoder_lr, config.decoder_weight_decay});
    }
    epoch_loss *= 1.0 / double(n);
    entry.loss = epoch_loss;
    entry.steps = optimizer.steps();

    const bool evaluate = dev != nullptr && options.eval_every > 0 &&
                          (epoch % options.eval_every == 0 || epoch == config.epochs);
    if (evaluate) {
      const Corpus pred = predict_corpus(parser, *dev, provider);
      entry.dev = score(pred.sentences, dev->sentences, !config.ablation_no_ent_rel);
      const double arg_c = (*entry.dev)[Metric::ArgC].f1();
      if (arg_c > result.best_dev_arg_c) {
        result.best_dev_arg_c = arg_c;
        result.best_epoch = epoch;
        entry.best = true;
      }
    }
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (!options.output_dir.empty()) {
      nlohmann::ordered_json extra = to_json(config);
      extra["epoch"] = epoch;
      save_checkpoint((fs::path(options.output_dir) / "last").string(), parser,
                      provider.provenance(), extra);
      if (entry.best || (dev == nullptr && epoch == config.epochs)) {
        save_checkpoint((fs::path(options.output_dir) / "best").string(), parser,
                        provider.provenance(), extra);
      }
      log_text += to_json(entry).dump() + "\n";
      write_file_atomic(log_path, log_text);
    }
    if (options.on_epoch) options.on_epoch(entry);
    result.log.push_back(std::move(entry));
  }
  return result;
}

}  // namespace jsee
