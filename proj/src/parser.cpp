#include "jsee/parser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "jsee/common.hpp"

namespace jsee {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

template <typename T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void ParserConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw Error(std::string("parser config: ") + name + " must be positive");
  };
  positive(query_length, "query_length");
  positive(hidden_size, "hidden_size");
  positive(n_heads, "n_heads");
  positive(ffn_size, "ffn_size");
  positive(hidden_size_anchor, "hidden_size_anchor");
  positive(hidden_size_edge_label, "hidden_size_edge_label");
  positive(hidden_size_edge_presence, "hidden_size_edge_presence");
  if (hidden_size % n_heads != 0) {
    throw Error("parser config: hidden_size must be divisible by n_heads");
  }
  for (double p : {dropout_transformer, dropout_transformer_attention}) {
    if (!(p >= 0.0 && p < 1.0)) throw Error("parser config: dropout must be in [0, 1)");
  }
  for (double t : {anchor_threshold, edge_threshold}) {
    if (!(t > 0.0 && t < 1.0)) throw Error("parser config: thresholds must be in (0, 1)");
  }
}

nlohmann::ordered_json to_json(const ParserConfig& c) {
  nlohmann::ordered_json j;
  j["query_length"] = c.query_length;
  j["n_transformer_layers"] = c.n_transformer_layers;
  j["hidden_size"] = c.hidden_size;
  j["n_heads"] = c.n_heads;
  j["ffn_size"] = c.ffn_size;
  j["hidden_size_anchor"] = c.hidden_size_anchor;
  j["hidden_size_edge_label"] = c.hidden_size_edge_label;
  j["hidden_size_edge_presence"] = c.hidden_size_edge_presence;
  j["dropout_transformer"] = c.dropout_transformer;
  j["dropout_transformer_attention"] = c.dropout_transformer_attention;
  j["anchor_threshold"] = c.anchor_threshold;
  j["edge_threshold"] = c.edge_threshold;
  j["positional_encoding"] = c.positional_encoding;
  j["event_only"] = c.event_only;
  j["init_seed"] = c.init_seed;
  return j;
}

ParserConfig parser_config_from_json(const nlohmann::json& j) {
  ParserConfig c;
  get_if(j, "query_length", c.query_length);
  get_if(j, "n_transformer_layers", c.n_transformer_layers);
  get_if(j, "hidden_size", c.hidden_size);
  get_if(j, "n_heads", c.n_heads);
  get_if(j, "ffn_size", c.ffn_size);
  get_if(j, "hidden_size_anchor", c.hidden_size_anchor);
  get_if(j, "hidden_size_edge_label", c.hidden_size_edge_label);
  get_if(j, "hidden_size_edge_presence", c.hidden_size_edge_presence);
  get_if(j, "dropout_transformer", c.dropout_transformer);
  get_if(j, "dropout_transformer_attention", c.dropout_transformer_attention);
  get_if(j, "anchor_threshold", c.anchor_threshold);
  get_if(j, "edge_threshold", c.edge_threshold);
  get_if(j, "positional_encoding", c.positional_encoding);
  get_if(j, "event_only", c.event_only);
  get_if(j, "init_seed", c.init_seed);
  c.validate();
  return c;
}

// ---- labels ----------------------------------------------------------------

LabelSpace LabelSpace::build(const Ontology& o, bool event_only) {
  LabelSpace ls;
  ls.event_only = event_only;
  ls.node_classes = {"<null>", kTriggerLabel};
  if (event_only) {
    ls.node_classes.emplace_back(kGenericEntityLabel);
  } else {
    ls.node_classes.insert(ls.node_classes.end(), o.entity_types.begin(), o.entity_types.end());
  }
  auto append = [&ls](const std::vector<std::string>& names, std::size_t& begin, std::size_t& end) {
    begin = ls.edge_labels.size();
    ls.edge_labels.insert(ls.edge_labels.end(), names.begin(), names.end());
    end = ls.edge_labels.size();
  };
  append(o.event_types, ls.event_begin, ls.event_end);
  append(o.argument_roles, ls.role_begin, ls.role_end);
  if (event_only) {
    ls.relation_begin = ls.relation_end = ls.edge_labels.size();
  } else {
    append(o.relation_types, ls.relation_begin, ls.relation_end);
  }
  return ls;
}

int LabelSpace::node_class(const GraphNode& n) const {
  if (n.kind == NodeKind::Trigger) return kTriggerClass;
  if (n.kind == NodeKind::Entity) {
    auto it = std::find(node_classes.begin() + 2, node_classes.end(), n.label);
    if (it != node_classes.end()) return static_cast<int>(it - node_classes.begin());
  }
  throw Error("no node class for label '" + n.label + "'");
}

int LabelSpace::edge_label_index(const std::string& label) const {
  auto it = std::find(edge_labels.begin(), edge_labels.end(), label);
  if (it == edge_labels.end()) throw Error("no edge class for label '" + label + "'");
  return static_cast<int>(it - edge_labels.begin());
}

// ---- model -----------------------------------------------------------------

Matrix positional_encoding(std::size_t tokens, std::size_t slots, std::size_t dim) {
  Matrix pe(tokens * slots, dim);
  for (std::size_t t = 0; t < tokens; ++t) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double freq = std::pow(10000.0, -static_cast<double>(k - k % 2) / double(dim));
      const double v = k % 2 == 0 ? std::sin(double(t) * freq) : std::cos(double(t) * freq);
      for (std::size_t s = 0; s < slots; ++s) pe(t * slots + s, k) = v;
    }
  }
  return pe;
}

Parser::Parser(ParserConfig config, Ontology ontology, std::size_t embed_layers,
               std::size_t embed_dim)
    : config_(std::move(config)),
      ontology_(std::move(ontology)),
      labels_(LabelSpace::build(ontology_, config_.event_only)),
      embed_layers_(embed_layers),
      embed_dim_(embed_dim) {
  config_.validate();
  ontology_.validate();
  if (embed_layers_ == 0 || embed_dim_ == 0) throw Error("embedding shape must be non-empty");

  std::mt19937_64 rng(config_.init_seed);
  const std::size_t H = config_.hidden_size;
  const auto D = ParamGroup::Decoder;

  pool_ = EncoderPool::create(params_, embed_layers_, embed_dim_);
  query_map_ = Linear::create(params_, "queries", embed_dim_, config_.query_length * H, D, rng);
  for (std::size_t l = 0; l < config_.n_transformer_layers; ++l) {
    const std::string p = "transformer." + std::to_string(l);
    TransformerLayer layer;
    layer.ln_attention = LayerNorm::create(params_, p + ".ln_attention", H);
    layer.qkv = Linear::create(params_, p + ".qkv", H, 3 * H, D, rng);
    layer.attention_out = Linear::create(params_, p + ".attention_out", H, H, D, rng);
    layer.ln_ffn = LayerNorm::create(params_, p + ".ln_ffn", H);
    layer.ffn_in = Linear::create(params_, p + ".ffn_in", H, config_.ffn_size, D, rng);
    layer.ffn_out = Linear::create(params_, p + ".ffn_out", config_.ffn_size, H, D, rng);
    transformer_.push_back(layer);
  }
  final_norm_ = LayerNorm::create(params_, "transformer.ln_final", H);

  label_hidden_ = FNN::create(params_, "label.hidden", H, H, D, rng);
  label_out_ = Linear::create(params_, "label.out", H, labels_.node_classes.size(), D, rng);

  const std::size_t A = config_.hidden_size_anchor;
  anchor_query_ = FNN::create(params_, "anchor.query", H, A, D, rng);
  anchor_token_ = FNN::create(params_, "anchor.token", embed_dim_, A, D, rng);
  anchor_biaffine_ = Biaffine::create(params_, "anchor.biaffine", A, A, 1, rng);

  root_embedding_ = params_.add("edge.root", init_matrix(1, H, 1.0, rng), D);
  const std::size_t P = config_.hidden_size_edge_presence;
  presence_head_ = FNN::create(params_, "edge_presence.head", H, P, D, rng);
  presence_dep_ = FNN::create(params_, "edge_presence.dep", H, P, D, rng);
  presence_biaffine_ = Biaffine::create(params_, "edge_presence.biaffine", P, P, 1, rng);
  const std::size_t L = config_.hidden_size_edge_label;
  label_head_ = FNN::create(params_, "edge_label.head", H, L, D, rng);
  label_dep_ = FNN::create(params_, "edge_label.dep", H, L, D, rng);
  label_biaffine_ = Biaffine::create(params_, "edge_label.biaffine", L, L,
                                     labels_.edge_labels.size(), rng);
}

Var Parser::embed(Tape& t, const EmbeddingBundle& bundle) const {
  if (bundle.layer_count() != embed_layers_ || bundle.dim() != embed_dim_) {
    throw Error("embedding shape mismatch for sentence '" + bundle.sentence_id + "': model expects " +
                std::to_string(embed_layers_) + "x" + std::to_string(embed_dim_) + ", got " +
                std::to_string(bundle.layer_count()) + "x" + std::to_string(bundle.dim()));
  }
  return pool_.apply(t, params_, bundle);
}

Var Parser::make_queries(Tape& t, Var e) const {
  const std::size_t T = e.rows(), ql = config_.query_length, H = config_.hidden_size;
  Var q = reshape(query_map_.apply(t, params_, e), T * ql, H);
  if (config_.positional_encoding) q = add(q, t.constant(positional_encoding(T, ql, H)));
  return q;
}

Var Parser::attention(Tape& t, const TransformerLayer& layer, Var x) const {
  const std::size_t H = config_.hidden_size, heads = config_.n_heads, dh = H / heads;
  Var qkv = layer.qkv.apply(t, params_, x);
  std::vector<Var> outputs;
  outputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = slice_cols(qkv, h * dh, dh);
    Var kh = slice_cols(qkv, H + h * dh, dh);
    Var vh = slice_cols(qkv, 2 * H + h * dh, dh);
    Var weights = softmax_rows(scale(matmul_nt(qh, kh), 1.0 / std::sqrt(double(dh))));
    weights = dropout(weights, config_.dropout_transformer_attention);
    outputs.push_back(matmul(weights, vh));
  }
  return layer.attention_out.apply(t, params_, concat_cols(outputs));
}

Var Parser::encode_queries(Tape& t, Var q) const {
  Var x = dropout(q, config_.dropout_transformer);
  for (const auto& layer : transformer_) {
    Var a = attention(t, layer, layer.ln_attention.apply(t, params_, x));
    x = add(x, dropout(a, config_.dropout_transformer));
    Var f = layer.ffn_in.apply(t, params_, layer.ln_ffn.apply(t, params_, x));
    f = layer.ffn_out.apply(t, params_, gelu(f));
    x = add(x, dropout(f, config_.dropout_transformer));
  }
  return final_norm_.apply(t, params_, x);
}

NodeScores Parser::predict_nodes(Tape& t, Var h, Var e) const {
  NodeScores out;
  out.label_logits = label_out_.apply(t, params_, label_hidden_.apply(t, params_, h));
  out.anchor_logits = anchor_biaffine_.apply(t, params_, anchor_query_.apply(t, params_, h),
                                             anchor_token_.apply(t, params_, e));
  return out;
}

EdgeScores Parser::predict_edges(Tape& t, Var h, const std::vector<int>& query_rows) const {
  Var nodes = t.param(params_, root_embedding_);
  if (!query_rows.empty()) nodes = concat_rows({nodes, gather_rows(h, query_rows)});
  EdgeScores out;
  out.presence_logits = presence_biaffine_.apply(t, params_, presence_head_.apply(t, params_, nodes),
                                                 presence_dep_.apply(t, params_, nodes));
  out.label_logits = label_biaffine_.apply(t, params_, label_head_.apply(t, params_, nodes),
                                           label_dep_.apply(t, params_, nodes));
  return out;
}

ParserOutput Parser::forward(const EmbeddingBundle& bundle) const {
  Tape t;
  Var e = embed(t, bundle);
  Var h = encode_queries(t, make_queries(t, e));
  NodeScores nodes = predict_nodes(t, h, e);

  ParserOutput out;
  out.node_label_logits = nodes.label_logits.value();
  out.anchor_logits = nodes.anchor_logits.value();
  const Matrix& logits = out.node_label_logits;
  out.query_to_node.assign(logits.rows(), -1);
  for (std::size_t q = 0; q < logits.rows(); ++q) {
    const auto row = logits.row(q);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best != LabelSpace::kNullClass) {
      out.node_queries.push_back(static_cast<int>(q));
      out.query_to_node[q] = static_cast<int>(out.node_queries.size());
    }
  }
  EdgeScores edges = predict_edges(t, h, out.node_queries);
  out.edge_presence_logits = edges.presence_logits.value();
  out.edge_label_logits = edges.label_logits.value();
  return out;
}

IEGraph Parser::parse(const Sentence& s, const EmbeddingBundle& bundle) const {
  if (bundle.token_count() != s.tokens.size()) {
    throw Error("alignment mismatch for sentence '" + s.id + "': " +
                std::to_string(s.tokens.size()) + " tokens but embeddings cover " +
                std::to_string(bundle.token_count()));
  }
  return decode_predictions(forward(bundle), labels_, config_.anchor_threshold,
                            config_.edge_threshold, s.id);
}

// ---- decoding ----------------------------------------------------------------

IEGraph decode_predictions(const ParserOutput& out, const LabelSpace& labels,
                           double anchor_threshold, double edge_threshold,
                           const std::string& sentence_id) {
  struct Candidate {
    NodeKind kind;
    std::string label;
    std::vector<int> anchor;
    int row;  // index into the edge matrices, -1 when absent
  };

  const Matrix& nl = out.node_label_logits;
  const Matrix& al = out.anchor_logits;
  const std::size_t n_edge_rows = out.edge_presence_logits.rows();
  const std::size_t channels = labels.edge_labels.size();
  const bool have_labels = n_edge_rows > 0 && out.edge_label_logits.rows() == n_edge_rows &&
                           out.edge_label_logits.cols() == n_edge_rows * channels &&
                           out.edge_presence_logits.cols() == n_edge_rows;

  std::vector<Candidate> cands;
  cands.push_back({NodeKind::Root, "", {}, have_labels ? 0 : -1});
  for (std::size_t q = 0; q < nl.rows(); ++q) {
    const auto row = nl.row(q);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == LabelSpace::kNullClass || best >= static_cast<int>(labels.node_classes.size())) {
      continue;
    }
    Candidate c;
    c.kind = best == LabelSpace::kTriggerClass ? NodeKind::Trigger : NodeKind::Entity;
    c.label = labels.node_classes[best];
    if (q < al.rows()) {
      for (std::size_t tok = 0; tok < al.cols(); ++tok) {
        const double p = sigmoid(al(q, tok));
        if (p > anchor_threshold) c.anchor.push_back(static_cast<int>(tok));
      }
    }
    if (c.anchor.empty()) continue;
    const int r = q < out.query_to_node.size() ? out.query_to_node[q] : -1;
    c.row = have_labels && r > 0 && static_cast<std::size_t>(r) < n_edge_rows ? r : -1;
    cands.push_back(std::move(c));
  }

  struct Scored {
    int src, dst;
    std::string label;
    double prob;
  };
  std::vector<Scored> edges;
  for (std::size_t a = 0; a < cands.size(); ++a) {
    for (std::size_t b = 0; b < cands.size(); ++b) {
      if (a == b || cands[a].row < 0 || cands[b].row < 0) continue;
      std::size_t begin = 0, end = 0;
      const NodeKind ka = cands[a].kind, kb = cands[b].kind;
      if (ka == NodeKind::Root && kb == NodeKind::Trigger) {
        begin = labels.event_begin, end = labels.event_end;
      } else if (ka == NodeKind::Trigger && kb == NodeKind::Entity) {
        begin = labels.role_begin, end = labels.role_end;
      } else if (ka == NodeKind::Entity && kb == NodeKind::Entity) {
        begin = labels.relation_begin, end = labels.relation_end;
      }
      if (begin == end) continue;
      const double p = sigmoid(out.edge_presence_logits(cands[a].row, cands[b].row));
      if (!(p > edge_threshold)) continue;
      std::size_t best = begin;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t col = static_cast<std::size_t>(cands[b].row) * channels;
        if (out.edge_label_logits(cands[a].row, col + k) >
            out.edge_label_logits(cands[a].row, col + best)) {
          best = k;
        }
      }
      edges.push_back({static_cast<int>(a), static_cast<int>(b), labels.edge_labels[best], p});
    }
  }

  // Each trigger keeps its most probable root edge; triggers without one go.
  std::vector<bool> keep(cands.size(), true);
  std::vector<int> root_edge(cands.size(), -1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (edges[k].src != 0) continue;
    int& cur = root_edge[edges[k].dst];
    if (cur < 0 || edges[k].prob > edges[cur].prob) cur = static_cast<int>(k);
  }
  for (std::size_t i = 1; i < cands.size(); ++i) {
    if (cands[i].kind == NodeKind::Trigger && root_edge[i] < 0) keep[i] = false;
  }
  auto edge_alive = [&](std::size_t k) {
    const auto& e = edges[k];
    if (!keep[e.src] || !keep[e.dst]) return false;
    return e.src != 0 || root_edge[e.dst] == static_cast<int>(k);
  };
  if (labels.event_only) {
    std::vector<bool> is_argument(cands.size(), false);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edge_alive(k) && cands[edges[k].src].kind == NodeKind::Trigger) {
        is_argument[edges[k].dst] = true;
      }
    }
    for (std::size_t i = 1; i < cands.size(); ++i) {
      if (cands[i].kind == NodeKind::Entity && !is_argument[i]) keep[i] = false;
    }
  }

  IEGraph g;
  g.sentence_id = sentence_id;
  g.reduced = labels.event_only;
  std::vector<int> remap(cands.size(), -1);
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (!keep[i]) continue;
    remap[i] = static_cast<int>(g.nodes.size());
    g.nodes.push_back({remap[i], cands[i].kind, cands[i].label, cands[i].anchor, ""});
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    if (!edge_alive(k)) continue;
    g.edges.push_back({remap[edges[k].src], remap[edges[k].dst], edges[k].label, ""});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
    return std::tie(x.src, x.dst) < std::tie(y.src, y.dst);
  });
  return g;
}

// ---- corpus prediction ---------------------------------------------------------

namespace {

Ontology event_only_ontology(const Ontology& o) {
  Ontology r = o;
  r.name = o.name + "+event-only";
  r.entity_types = {kGenericEntityLabel};
  r.relation_types.clear();
  return r;
}

}  // namespace

Corpus predict_corpus(const Parser& parser, const Corpus& input, const EmbeddingProvider& provider) {
  Corpus out;
  out.schema_version = input.schema_version;
  out.split = input.split;
  out.variant = input.variant;
  out.ontology =
      parser.config().event_only ? event_only_ontology(parser.ontology()) : parser.ontology();
  out.sentences.resize(input.sentences.size());

  const auto n = static_cast<std::ptrdiff_t>(input.sentences.size());
  std::vector<std::exception_ptr> errors(input.sentences.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const Sentence& src = input.sentences[i];
      Sentence s;
      s.id = src.id;
      s.doc_id = src.doc_id;
      s.lang = src.lang;
      s.text = src.text;
      s.tokens = src.tokens;
      const IEGraph g = parser.parse(src, provider.embed(src));
      Annotations a = decode(g, out.ontology, static_cast<int>(src.tokens.size()));
      s.entities = std::move(a.entities);
      s.relations = std::move(a.relations);
      s.events = std::move(a.events);
      out.sentences[i] = std::move(s);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---- checkpoints -----------------------------------------------------------------

namespace {

constexpr char kParamsMagic[8] = {'J', 'S', 'E', 'E', 'P', 'R', 'M', '1'};

template <typename T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Reader {
 public:
  Reader(const std::string& data, std::string path) : data_(data), path_(std::move(path)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error("truncated parameter file: " + path_);
  }

  const std::string& data_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_params(const std::string& path, const ParamStore& store) {
  std::string buf(kParamsMagic, sizeof(kParamsMagic));
  put<std::uint64_t>(buf, store.size());
  for (const auto& p : store.all()) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
    buf += p.name;
    put<std::uint8_t>(buf, p.group == ParamGroup::Encoder ? 0 : 1);
    put<std::uint64_t>(buf, p.value.rows());
    put<std::uint64_t>(buf, p.value.cols());
    for (double v : p.value.values()) put<double>(buf, v);
  }
  write_file_atomic(path, buf);
}

void read_params(const std::string& path, ParamStore& store) {
  const std::string data = read_file(path);
  Reader r(data, path);
  if (r.bytes(sizeof(kParamsMagic)) != std::string(kParamsMagic, sizeof(kParamsMagic))) {
    throw Error("not a parameter file: " + path);
  }
  const auto count = r.get<std::uint64_t>();
  if (count != store.size()) {
    throw Error("parameter count mismatch in " + path + ": file has " + std::to_string(count) +
                ", model has " + std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.get<std::uint32_t>());
    r.get<std::uint8_t>();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    Parameter& p = store[i];
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw Error("parameter '" + name + "' in " + path + " does not match model parameter '" +
                  p.name + "'");
    }
    for (double& v : p.value.values()) v = r.get<double>();
  }
  if (!r.at_end()) throw Error("trailing bytes in parameter file: " + path);
}

void save_checkpoint(const std::string& dir, const Parser& parser,
                     const nlohmann::ordered_json& provenance,
                     const nlohmann::ordered_json& extra_config) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json config;
  config["parser"] = to_json(parser.config());
  config["embedding"] = {{"layers", parser.embed_layers()}, {"dim", parser.embed_dim()}};
  if (!extra_config.is_null()) config["training"] = extra_config;
  write_file_atomic((fs::path(dir) / "config.json").string(), config.dump(2) + "\n");
  write_file_atomic((fs::path(dir) / "ontology.json").string(),
                    to_json(parser.ontology()).dump(2) + "\n");
  write_file_atomic((fs::path(dir) / "provenance.json").string(), provenance.dump(2) + "\n");
  write_params((fs::path(dir) / "params.bin").string(), parser.params());
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  for (const char* f : {"config.json", "params.bin", "ontology.json", "provenance.json"}) {
    if (!fs::exists(root / f)) throw Error("checkpoint '" + dir + "' is missing " + f);
  }
  LoadedCheckpoint out;
  out.config = nlohmann::json::parse(read_file((root / "config.json").string()));
  out.provenance = nlohmann::json::parse(read_file((root / "provenance.json").string()));
  const Ontology ontology = load_ontology((root / "ontology.json").string());
  const auto& emb = out.config.at("embedding");
  out.parser = std::make_unique<Parser>(parser_config_from_json(out.config.at("parser")), ontology,
                                        emb.at("layers").get<std::size_t>(),
                                        emb.at("dim").get<std::size_t>());
  read_params((root / "params.bin").string(), out.parser->params());
  return out;
}

}  // namespace jsee
