#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "jsee/matrix.hpp"
#include "jsee/tape.hpp"

namespace jsee {

// Per-sentence multi-layer subword vectors with their token alignment.
struct EmbeddingBundle {
  std::string sentence_id;
  std::vector<Matrix> layers;                // L matrices, each S x D
  std::vector<std::vector<int>> alignment;   // token -> ordered subword indices

  std::size_t layer_count() const { return layers.size(); }
  std::size_t subword_count() const { return layers.empty() ? 0 : layers[0].rows(); }
  std::size_t dim() const { return layers.empty() ? 0 : layers[0].cols(); }
  std::size_t token_count() const { return alignment.size(); }

  // Every subword belongs to exactly one token, shapes agree, values are
  // finite. Throws SchemaError.
  void validate() const;
};

struct EncoderPoolParams {
  Matrix layer_weights;   // 1 x L, softmaxed before use
  Matrix subword_score;   // 1 x D, linear attention score shared across layers
};

struct BiaffineParams {
  Matrix u;     // D1 x (K*D2)
  Matrix w;     // K x (D1+D2)
  Matrix bias;  // 1 x K
  std::size_t channels = 1;
};

// Single-layer feed-forward network: gelu(x W + b).
struct FNNParams {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

std::vector<double> softmax(const std::vector<double>& x);
double gelu(double x);

// Token embeddings (T x D): subword attention inside each token, then the
// softmax(layer_weights) mix across layers.
Matrix pool_embeddings(const EmbeddingBundle& bundle, const EncoderPoolParams& params);
// out(i, j*K + k) = x1_i^T U_k x2_j
Matrix bilinear(const Matrix& x1, const Matrix& x2, const Matrix& u, std::size_t channels);
Matrix biaffine(const Matrix& x1, const Matrix& x2, const BiaffineParams& params);
Matrix fnn(const Matrix& x, const FNNParams& params);

// ---- parameterized layers over a ParamStore ------------------------------

// Gaussian initialisation with std = gain / sqrt(fan_in).
Matrix init_matrix(std::size_t rows, std::size_t cols, double std_dev, std::mt19937_64& rng);

struct Linear {
  std::size_t weight = 0;  // in x out
  std::size_t bias = 0;    // 1 x out

  static Linear create(ParamStore& store, const std::string& name, std::size_t in,
                       std::size_t out, ParamGroup group, std::mt19937_64& rng);
  Var apply(Tape& t, const ParamStore& store, Var x) const;
};

struct FNN {
  Linear linear;

  static FNN create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                    ParamGroup group, std::mt19937_64& rng);
  Var apply(Tape& t, const ParamStore& store, Var x) const;
  FNNParams snapshot(const ParamStore& store) const;
};

struct Biaffine {
  std::size_t u = 0;
  std::size_t w = 0;
  std::size_t bias = 0;
  std::size_t channels = 1;

  static Biaffine create(ParamStore& store, const std::string& name, std::size_t d1,
                         std::size_t d2, std::size_t channels, std::mt19937_64& rng);
  Var apply(Tape& t, const ParamStore& store, Var x1, Var x2) const;
  BiaffineParams snapshot(const ParamStore& store) const;
};

struct LayerNorm {
  std::size_t gain = 0;
  std::size_t bias = 0;

  static LayerNorm create(ParamStore& store, const std::string& name, std::size_t dim);
  Var apply(Tape& t, const ParamStore& store, Var x) const;
};

struct EncoderPool {
  std::size_t layer_weights = 0;
  std::size_t subword_score = 0;

  static EncoderPool create(ParamStore& store, std::size_t layers, std::size_t dim);
  Var apply(Tape& t, const ParamStore& store, const EmbeddingBundle& bundle) const;
  EncoderPoolParams snapshot(const ParamStore& store) const;
};

}  // namespace jsee
