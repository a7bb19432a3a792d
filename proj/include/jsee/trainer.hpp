#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsee/corpus.hpp"
#include "jsee/embeddings.hpp"
#include "jsee/graph.hpp"
#include "jsee/parser.hpp"
#include "jsee/scorer.hpp"

namespace jsee {

enum class TargetMatching {
  Leftmost,     // deterministic leftmost-anchor slot rule
  Permutation,  // experimental: re-permute co-located slots by current model cost
};

std::string to_string(TargetMatching m);
TargetMatching parse_target_matching(const std::string& s);

struct TrainConfig {
  std::size_t batch_size = 16;
  double beta_1 = 0.9;
  double beta_2 = 0.98;
  double epsilon = 1e-8;
  double decoder_learning_rate = 1.0e-4;
  double decoder_weight_decay = 1.2e-6;
  double encoder_learning_rate = 4.0e-6;
  double encoder_weight_decay = 0.1;
  std::size_t epochs = 110;
  std::size_t warmup_steps = 1000;
  std::uint64_t seed = 1;
  bool ablation_no_ent_rel = false;
  TargetMatching target_matching = TargetMatching::Leftmost;
  ParserConfig parser;

  void validate() const;
};

// Flat object using the hyperparameter names of the parser and trainer
// (batch_size, beta_2, decoder_learning_rate, ..., query_length).
nlohmann::ordered_json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Per-sentence training targets. Query q = token * query_length + slot.
// Edge matrices are indexed like the model's edge scores: row 0 is the
// root, row n >= 1 is the gold node with id n.
struct TargetAssignment {
  std::string sentence_id;
  std::size_t tokens = 0;
  std::size_t query_length = 0;
  std::vector<int> slot_node;     // Q entries, gold node id or -1
  std::vector<int> node_slot;     // per gold node id; -1 for the root
  std::vector<int> node_classes;  // Q entries, LabelSpace node class (0 = null)
  Matrix anchor_targets;          // Q x T
  Matrix anchor_mask;             // Q x T, ones on assigned rows
  std::vector<int> edge_queries;  // query row of gold nodes 1..N-1
  Matrix edge_presence;           // N x N
  Matrix edge_mask;               // N x N, off-diagonal cells not ending at the root
  std::vector<CellTarget> edge_labels;
};

// Throws Error naming the sentence when some node finds no free slot.
TargetAssignment assign_targets(const IEGraph& gold, std::size_t tokens, std::size_t query_length,
                                const LabelSpace& labels);

// Re-permutes the gold nodes assigned to each token's slots so that the
// summed node-label and anchor cost under the given logits is minimal.
void permute_targets(TargetAssignment& t, const Matrix& node_logits, const Matrix& anchor_logits);

struct LossBreakdown {
  double node_label = 0.0;
  double anchor = 0.0;
  double edge_presence = 0.0;
  double edge_label = 0.0;

  double total() const { return node_label + anchor + edge_presence + edge_label; }
  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator*=(double s);
};

nlohmann::ordered_json to_json(const LossBreakdown& l);

struct LossVars {
  Var total;
  LossBreakdown parts;
};

// Unit-weighted sum of the four loss parts, each a mean over its cells.
LossVars compute_loss(Tape& t, const NodeScores& nodes, const EdgeScores& edges,
                      const TargetAssignment& targets, const LabelSpace& labels);

// Forward + loss for one sentence with edges teacher-forced over the gold
// nodes. Gradients are added into `grads` when given; dropout is active when
// `dropout_rng` is given.
LossBreakdown sentence_loss(const Parser& parser, const EmbeddingBundle& bundle,
                            TargetAssignment targets, std::vector<Matrix>* grads,
                            std::mt19937_64* dropout_rng,
                            TargetMatching matching = TargetMatching::Leftmost);

// Linear warmup from 0 then cosine decay to 0 at `total_steps`.
struct WarmupCosine {
  double peak = 0.0;
  std::size_t warmup_steps = 0;
  std::size_t total_steps = 0;

  double operator()(std::size_t step) const;
};

// AdamW with decoupled weight decay and per-group learning rates.
class AdamW {
 public:
  AdamW(const ParamStore& store, double beta_1, double beta_2, double epsilon);

  struct GroupSettings {
    double learning_rate = 0.0;
    double weight_decay = 0.0;
  };

  void step(ParamStore& store, const std::vector<Matrix>& grads, GroupSettings encoder,
            GroupSettings decoder);
  std::size_t steps() const { return steps_; }

 private:
  double beta_1_, beta_2_, epsilon_;
  std::size_t steps_ = 0;
  std::vector<Matrix> m_, v_;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  std::size_t steps = 0;  // optimizer steps so far
  LossBreakdown loss;     // mean over the epoch's sentences
  double encoder_lr = 0.0;
  double decoder_lr = 0.0;
  std::optional<ScoreReport> dev;
  bool best = false;
  double seconds = 0.0;
};

nlohmann::ordered_json to_json(const EpochLog& e);

struct TrainOptions {
  // Checkpoints go to <dir>/last and <dir>/best; the log to <dir>/train_log.jsonl.
  std::string output_dir;
  std::size_t eval_every = 1;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_dev_arg_c = -1.0;
};

// Builds a parser shaped for the provider's embeddings.
Parser make_parser(const TrainConfig& config, const Ontology& ontology,
                   const EmbeddingProvider& provider);

// Trains `parser` in place on the concatenation of `train` (all corpora must
// share one ontology). Dev scoring picks the best epoch by Arg-C F1.
TrainResult train(Parser& parser, const TrainConfig& config, const std::vector<Corpus>& train,
                  const Corpus* dev, const EmbeddingProvider& provider,
                  const TrainOptions& options = {});

}  // namespace jsee
