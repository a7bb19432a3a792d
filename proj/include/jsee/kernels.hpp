#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "jsee/matrix.hpp"

// Dense kernels behind the neural core. The top-level functions are
// OpenMP-parallel; `kernels::serial` holds straightforward reference loops
// with the same contracts, used by the equivalence tests and the benchmark.
namespace jsee::kernels {

enum class Trans { No, Yes };

// c = op(a) * op(b); with `accumulate`, c += op(a) * op(b).
void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c,
          bool accumulate = false);

// Biaffine scores for every (i, j) pair and channel k:
//   out(i, j*K + k) = x1_i^T U_k x2_j + W_k (x1_i ++ x2_j) + bias_k
// Shapes: x1 N1xD1, x2 N2xD2, u D1x(K*D2) with U_k = u[:, k*D2:(k+1)*D2],
// w Kx(D1+D2). An empty `w` or `bias` drops that term (pure bilinear form).
void biaffine_forward(const Matrix& x1, const Matrix& x2, const Matrix& u, const Matrix& w,
                      std::span<const double> bias, std::size_t channels, Matrix& out);

// Gradient sinks for biaffine_backward; null / empty members are skipped.
// Every sink is accumulated into, never overwritten.
struct BiaffineGrads {
  Matrix* x1 = nullptr;
  Matrix* x2 = nullptr;
  Matrix* u = nullptr;
  Matrix* w = nullptr;
  std::span<double> bias;
};

void biaffine_backward(const Matrix& grad_out, const Matrix& x1, const Matrix& x2,
                       const Matrix& u, const Matrix& w, std::size_t channels,
                       const BiaffineGrads& grads);

// Token pooling over subwords. `layers` holds L matrices of shape SxD,
// `layer_probs` the softmaxed layer weights, `score` the subword attention
// vector (length D). Outputs token vectors (TxD) plus the cached layer mix
// (SxD) and per-subword attention weights (S).
void pool_forward(std::span<const Matrix> layers, const std::vector<std::vector<int>>& alignment,
                  std::span<const double> layer_probs, std::span<const double> score, Matrix& out,
                  Matrix& mixed, std::vector<double>& alpha);

// Accumulates d loss / d layer_probs and d loss / d score.
void pool_backward(const Matrix& grad_out, std::span<const Matrix> layers,
                   const std::vector<std::vector<int>>& alignment,
                   std::span<const double> score, const Matrix& mixed,
                   const std::vector<double>& alpha, std::span<double> d_layer_probs,
                   std::span<double> d_score);

namespace serial {

void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c,
          bool accumulate = false);
void biaffine_forward(const Matrix& x1, const Matrix& x2, const Matrix& u, const Matrix& w,
                      std::span<const double> bias, std::size_t channels, Matrix& out);
void biaffine_backward(const Matrix& grad_out, const Matrix& x1, const Matrix& x2,
                       const Matrix& u, const Matrix& w, std::size_t channels,
                       const BiaffineGrads& grads);
void pool_forward(std::span<const Matrix> layers, const std::vector<std::vector<int>>& alignment,
                  std::span<const double> layer_probs, std::span<const double> score, Matrix& out,
                  Matrix& mixed, std::vector<double>& alpha);
void pool_backward(const Matrix& grad_out, std::span<const Matrix> layers,
                   const std::vector<std::vector<int>>& alignment,
                   std::span<const double> score, const Matrix& mixed,
                   const std::vector<double>& alpha, std::span<double> d_layer_probs,
                   std::span<double> d_score);

}  // namespace serial
}  // namespace jsee::kernels
