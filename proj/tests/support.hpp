#pragma once

// Shared helpers for the unit and acceptance tests: random data generators
// and reference implementations written independently of the library.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "jsee/corpus.hpp"
#include "jsee/embeddings.hpp"
#include "jsee/matrix.hpp"
#include "jsee/nesting.hpp"
#include "jsee/parser.hpp"
#include "jsee/scorer.hpp"
#include "jsee/tape.hpp"
#include "jsee/trainer.hpp"

namespace testing {

std::string source_path(const std::string& relative);

jsee::Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                           double scale = 1.0);

struct RandomSentenceOptions {
  int min_tokens = 3;
  int max_tokens = 12;
  int max_entities = 5;
  int max_events = 4;
  int max_relations = 3;
  int max_arguments = 9;         // over all events
  double head_rate = 0.0;        // share of multi-token entities given a head
  double double_tag_rate = 0.35; // chance a new event reuses an existing trigger span
};

// Valid random sentence (passes validate_sentence) in a random language.
jsee::Sentence random_sentence(std::mt19937_64& rng, const jsee::Ontology& o, const std::string& id,
                               const RandomSentenceOptions& opts = {});
jsee::Corpus random_corpus(std::mt19937_64& rng, const jsee::Ontology& o, int sentences,
                           const RandomSentenceOptions& opts = {});

// Small ontology (two symbols per inventory) so random annotations collide.
jsee::Ontology tiny_ontology();
// Copy of `s` with random edits: dropped, retyped, re-spanned and added
// annotations. The result stays valid.
jsee::Sentence mutate_sentence(std::mt19937_64& rng, const jsee::Sentence& s,
                               const jsee::Ontology& o);

// ---- scorer oracle ----------------------------------------------------------------

// Exhaustive maximum one-to-one matching of equal keys (small inputs only).
std::int64_t brute_force_matches(const std::vector<std::string>& pred,
                                 const std::vector<std::string>& gold);
// Per-metric counts through brute force, keys derived here from the definitions.
jsee::ScoreReport brute_force_score(const jsee::Sentence& pred, const jsee::Sentence& gold);

// ---- nesting oracle ---------------------------------------------------------------

jsee::NestingReport all_pairs_nesting(const jsee::Corpus& c);

// ---- numeric helpers --------------------------------------------------------------

double gelu_ref(double x);

// Norm-wise relative error ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                      double floor = 1e-12);

// Gradient check of a tape expression. `build` maps input Vars to any
// matrix; it is reduced to a scalar with fixed random weights. Returns the
// worst norm-wise relative error over all inputs.
double check_gradients(const std::vector<jsee::Matrix>& inputs,
                       const std::function<jsee::Var(jsee::Tape&, const std::vector<jsee::Var>&)>& build,
                       std::uint64_t seed = 1, double step = 1e-5);

// ---- scalar-loop oracles ---------------------------------------------------------

// out(i, j*K + k) as explicit sums; `w` and `bias` may be empty.
jsee::Matrix biaffine_loops(const jsee::Matrix& x1, const jsee::Matrix& x2, const jsee::Matrix& u,
                            const jsee::Matrix& w, const jsee::Matrix& bias, std::size_t K);
// GELU(x W + b) element by element.
jsee::Matrix fnn_loops(const jsee::Matrix& x, const jsee::Matrix& weight, const jsee::Matrix& bias);
jsee::Matrix pool_loops(const jsee::EmbeddingBundle& b, const jsee::Matrix& layer_weights,
                        const jsee::Matrix& score);
// Bundle with 1-3 subword pieces per token.
jsee::EmbeddingBundle random_bundle(std::mt19937_64& rng, std::size_t tokens, std::size_t layers,
                                    std::size_t dim);

// ---- model fixtures ---------------------------------------------------------------

// Random but internally consistent raw parser output.
jsee::ParserOutput random_parser_output(std::mt19937_64& rng, const jsee::LabelSpace& labels,
                                        std::size_t tokens, std::size_t query_length,
                                        double scale = 3.0);

// Small model settings for fast tests.
jsee::ParserConfig tiny_parser_config();

// "Ann hit Bob": an attack with both arguments and a relation.
jsee::Sentence three_token_sentence();

// Training loss gradient of a tiny parser on three_token_sentence() against
// central differences at `probes` random coordinates of every parameter.
// Returns the worst norm-wise error over the two parameter groups.
double end_to_end_gradient_error(std::uint64_t seed = 5, int probes = 3);

// Settings of the overfit harness: trainer defaults with a narrower model,
// learning rates x10 and a 100-step warmup for the ~600-step run.
jsee::TrainConfig overfit_config(std::uint64_t seed);

}  // namespace testing
