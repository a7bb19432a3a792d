#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "jsee/matrix.hpp"

namespace jsee {

enum class ParamGroup { Encoder, Decoder };

struct Parameter {
  std::string name;
  Matrix value;
  ParamGroup group = ParamGroup::Decoder;
};

// Owns every trainable matrix of a model, addressed by dense index.
class ParamStore {
 public:
  std::size_t add(std::string name, Matrix init, ParamGroup group);
  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  // Throws Error for unknown names.
  std::size_t index_of(const std::string& name) const;
  std::size_t scalar_count() const;
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  // Zero-filled gradient buffers shaped like the parameters.
  std::vector<Matrix> zero_grads() const;

 private:
  std::vector<Parameter> params_;
};

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode recorder. Values are computed eagerly; backward() replays the
// recorded closures in reverse order.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m);
  // Leaf whose gradient is kept on the tape (gradient checks, inputs).
  Var input(Matrix m);
  // Leaf bound to a parameter; gradients are routed to the buffer given to
  // backward(). The store must outlive the tape.
  Var param(const ParamStore& store, std::size_t index);

  Var record(Matrix value, bool requires_grad, BackwardFn fn);

  const Matrix& value(int id) const;
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  // Gradient accumulator of a node, allocated on first use.
  Matrix& grad(int id);
  const Matrix& grad(Var v) const;

  // `loss` must be 1x1. Parameter gradients are added into `param_grads`
  // (indexed like the ParamStore) when given.
  void backward(Var loss, std::vector<Matrix>* param_grads = nullptr);

  std::size_t size() const { return nodes_.size(); }

  // Dropout state: disabled unless `training` is set and an engine is given.
  bool training = false;
  std::mt19937_64* rng = nullptr;

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    int param = -1;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// ---- ops ---------------------------------------------------------------
Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var add_row(Var a, Var row);  // row is 1 x cols, broadcast over rows
Var scale(Var a, double s);
Var gelu(Var a);
Var softmax_rows(Var a);
Var layer_norm(Var a, Var gain, Var bias, double eps = 1e-5);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_rows(const std::vector<Var>& parts);
Var gather_rows(Var a, const std::vector<int>& rows);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var dropout(Var a, double p);
Var sum_scalars(const std::vector<Var>& scalars);

// Biaffine scores (see kernels::biaffine_forward); pass an invalid Var for
// `w` and `bias` to get the pure bilinear form.
Var biaffine(Var x1, Var x2, Var u, Var w, Var bias, std::size_t channels);

// Subword pooling. `layer_weights` is 1xL (softmaxed inside), `score` 1xD.
Var pool(const std::vector<Matrix>& layers, const std::vector<std::vector<int>>& alignment,
         Var layer_weights, Var score);

// Mean cross-entropy over rows whose target is >= 0.
Var cross_entropy(Var logits, const std::vector<int>& targets);
// Mean binary cross-entropy with logits over cells where mask != 0.
Var bce_with_logits(Var logits, const Matrix& targets, const Matrix& mask);

struct CellTarget {
  int i = 0;
  int j = 0;
  int label = 0;
};
// Mean cross-entropy over the channel vectors logits(i, j*K : (j+1)*K).
Var cell_cross_entropy(Var logits, std::size_t channels, const std::vector<CellTarget>& cells);

}  // namespace jsee
