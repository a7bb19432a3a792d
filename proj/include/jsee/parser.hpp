#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsee/corpus.hpp"
#include "jsee/embeddings.hpp"
#include "jsee/graph.hpp"
#include "jsee/neural.hpp"
#include "jsee/tape.hpp"

namespace jsee {

struct ParserConfig {
  std::size_t query_length = 2;
  std::size_t n_transformer_layers = 3;
  std::size_t hidden_size = 256;  // query / transformer width
  std::size_t n_heads = 8;
  std::size_t ffn_size = 512;
  std::size_t hidden_size_anchor = 256;
  std::size_t hidden_size_edge_label = 256;
  std::size_t hidden_size_edge_presence = 256;
  double dropout_transformer = 0.25;
  double dropout_transformer_attention = 0.1;
  double anchor_threshold = 0.5;
  double edge_threshold = 0.5;
  bool positional_encoding = true;
  // Event-only graphs: entity types collapsed to one label, no relations.
  bool event_only = false;
  std::uint64_t init_seed = 1;

  // Throws Error on non-positive sizes or thresholds outside (0, 1).
  void validate() const;
};

nlohmann::ordered_json to_json(const ParserConfig& c);
// Missing keys keep their defaults.
ParserConfig parser_config_from_json(const nlohmann::json& j);

// Class inventories derived from the ontology.
struct LabelSpace {
  std::vector<std::string> node_classes;  // [null, trigger, entity labels...]
  std::vector<std::string> edge_labels;   // event types, then roles, then relation types
  std::size_t event_begin = 0, event_end = 0;
  std::size_t role_begin = 0, role_end = 0;
  std::size_t relation_begin = 0, relation_end = 0;
  bool event_only = false;

  static constexpr int kNullClass = 0;
  static constexpr int kTriggerClass = 1;

  static LabelSpace build(const Ontology& o, bool event_only);
  // Node class of a graph node (trigger or entity label); throws for unknown labels.
  int node_class(const GraphNode& n) const;
  int edge_label_index(const std::string& label) const;
};

// Raw scores for one sentence. Edge matrices are indexed by output node:
// 0 is the root, node n >= 1 comes from query node_queries[n - 1].
struct ParserOutput {
  Matrix node_label_logits;     // Q x C
  Matrix anchor_logits;         // Q x T
  Matrix edge_presence_logits;  // N x N
  Matrix edge_label_logits;     // N x (N * R), channel-minor
  std::vector<int> query_to_node;  // Q entries, -1 for null queries
  std::vector<int> node_queries;   // N - 1 entries
};

struct NodeScores {
  Var label_logits;
  Var anchor_logits;
};

struct EdgeScores {
  Var presence_logits;
  Var label_logits;
};

// Query-based graph parser: pooled embeddings -> queries -> transformer ->
// node labels + anchors -> edge presence + labels.
class Parser {
 public:
  Parser(ParserConfig config, Ontology ontology, std::size_t embed_layers, std::size_t embed_dim);

  const ParserConfig& config() const { return config_; }
  ParserConfig& mutable_config() { return config_; }
  const Ontology& ontology() const { return ontology_; }
  const LabelSpace& labels() const { return labels_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t embed_layers() const { return embed_layers_; }
  std::size_t embed_dim() const { return embed_dim_; }

  // The bundle must outlive the tape.
  Var embed(Tape& t, const EmbeddingBundle& bundle) const;
  // T x D -> (T * query_length) x H, ordered token-major then slot.
  Var make_queries(Tape& t, Var e) const;
  Var encode_queries(Tape& t, Var q) const;
  NodeScores predict_nodes(Tape& t, Var h, Var e) const;
  // Edge scores over the root plus the given query rows of h.
  EdgeScores predict_edges(Tape& t, Var h, const std::vector<int>& query_rows) const;

  // Inference forward pass (no dropout, no gradients).
  ParserOutput forward(const EmbeddingBundle& bundle) const;
  // Throws Error on alignment mismatch between sentence and bundle.
  IEGraph parse(const Sentence& s, const EmbeddingBundle& bundle) const;

 private:
  struct TransformerLayer {
    LayerNorm ln_attention;
    Linear qkv;
    Linear attention_out;
    LayerNorm ln_ffn;
    Linear ffn_in;
    Linear ffn_out;
  };

  Var attention(Tape& t, const TransformerLayer& layer, Var x) const;

  ParserConfig config_;
  Ontology ontology_;
  LabelSpace labels_;
  std::size_t embed_layers_;
  std::size_t embed_dim_;
  ParamStore params_;

  EncoderPool pool_;
  Linear query_map_;
  std::vector<TransformerLayer> transformer_;
  LayerNorm final_norm_;
  FNN label_hidden_;
  Linear label_out_;
  FNN anchor_query_;
  FNN anchor_token_;
  Biaffine anchor_biaffine_;
  std::size_t root_embedding_ = 0;
  FNN presence_head_, presence_dep_;
  Biaffine presence_biaffine_;
  FNN label_head_, label_dep_;
  Biaffine label_biaffine_;
};

// Sinusoidal position codes for token positions, repeated for each query slot.
Matrix positional_encoding(std::size_t tokens, std::size_t slots, std::size_t dim);

// Constrained decoding. Total: always returns a graph that passes validate().
IEGraph decode_predictions(const ParserOutput& out, const LabelSpace& labels,
                           double anchor_threshold, double edge_threshold,
                           const std::string& sentence_id = "");

// Runs parse + decode over a corpus; sentences are processed in parallel.
Corpus predict_corpus(const Parser& parser, const Corpus& input, const EmbeddingProvider& provider);

// Checkpoint directory: config.json, params.bin, ontology.json, provenance.json.
void save_checkpoint(const std::string& dir, const Parser& parser,
                     const nlohmann::ordered_json& provenance,
                     const nlohmann::ordered_json& extra_config = {});
struct LoadedCheckpoint {
  std::unique_ptr<Parser> parser;
  nlohmann::json provenance;
  nlohmann::json config;
};
LoadedCheckpoint load_checkpoint(const std::string& dir);

void write_params(const std::string& path, const ParamStore& store);
void read_params(const std::string& path, ParamStore& store);

}  // namespace jsee
