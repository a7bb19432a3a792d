#include <cmath>

#include "jsee/common.hpp"
#include "jsee/kernels.hpp"

// Reference loops: one output element at a time, no reuse of intermediates.
namespace jsee::kernels::serial {

void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate) {
  auto at = [&](std::size_t i, std::size_t p) { return ta == Trans::No ? a(i, p) : a(p, i); };
  auto bt = [&](std::size_t p, std::size_t j) { return tb == Trans::No ? b(p, j) : b(j, p); };
  const std::size_t m = ta == Trans::No ? a.rows() : a.cols();
  const std::size_t k = ta == Trans::No ? a.cols() : a.rows();
  const std::size_t n = tb == Trans::No ? b.cols() : b.rows();
  if ((tb == Trans::No ? b.rows() : b.cols()) != k) throw Error("gemm: inner dimensions differ");
  if (accumulate) {
    if (c.rows() != m || c.cols() != n) throw Error("gemm: accumulator has the wrong shape");
  } else {
    c.resize(m, n);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += at(i, p) * bt(p, j);
      c(i, j) += s;
    }
  }
}

void biaffine_forward(const Matrix& x1, const Matrix& x2, const Matrix& u, const Matrix& w,
                      std::span<const double> bias, std::size_t channels, Matrix& out) {
  const std::size_t n1 = x1.rows(), n2 = x2.rows(), d1 = x1.cols(), d2 = x2.cols();
  if (u.rows() != d1 || u.cols() != channels * d2) throw Error("biaffine: bilinear tensor shape mismatch");
  out.resize(n1, n2 * channels);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t k = 0; k < channels; ++k) {
        double s = 0.0;
        for (std::size_t a = 0; a < d1; ++a) {
          for (std::size_t b = 0; b < d2; ++b) s += x1(i, a) * u(a, k * d2 + b) * x2(j, b);
        }
        if (!w.empty()) {
          for (std::size_t a = 0; a < d1; ++a) s += w(k, a) * x1(i, a);
          for (std::size_t b = 0; b < d2; ++b) s += w(k, d1 + b) * x2(j, b);
        }
        if (!bias.empty()) s += bias[k];
        out(i, j * channels + k) = s;
      }
    }
  }
}

void biaffine_backward(const Matrix& grad_out, const Matrix& x1, const Matrix& x2,
                       const Matrix& u, const Matrix& w, std::size_t channels,
                       const BiaffineGrads& grads) {
  const std::size_t n1 = x1.rows(), n2 = x2.rows(), d1 = x1.cols(), d2 = x2.cols();
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t k = 0; k < channels; ++k) {
        const double g = grad_out(i, j * channels + k);
        for (std::size_t a = 0; a < d1; ++a) {
          for (std::size_t b = 0; b < d2; ++b) {
            const double ukab = u(a, k * d2 + b);
            if (grads.u) (*grads.u)(a, k * d2 + b) += g * x1(i, a) * x2(j, b);
            if (grads.x1) (*grads.x1)(i, a) += g * ukab * x2(j, b);
            if (grads.x2) (*grads.x2)(j, b) += g * x1(i, a) * ukab;
          }
        }
        if (!w.empty()) {
          for (std::size_t a = 0; a < d1; ++a) {
            if (grads.w) (*grads.w)(k, a) += g * x1(i, a);
            if (grads.x1) (*grads.x1)(i, a) += g * w(k, a);
          }
          for (std::size_t b = 0; b < d2; ++b) {
            if (grads.w) (*grads.w)(k, d1 + b) += g * x2(j, b);
            if (grads.x2) (*grads.x2)(j, b) += g * w(k, d1 + b);
          }
        }
        if (!grads.bias.empty()) grads.bias[k] += g;
      }
    }
  }
}

void pool_forward(std::span<const Matrix> layers, const std::vector<std::vector<int>>& alignment,
                  std::span<const double> layer_probs, std::span<const double> score, Matrix& out,
                  Matrix& mixed, std::vector<double>& alpha) {
  if (layers.empty() || layer_probs.size() != layers.size()) throw Error("pool: layer mismatch");
  const std::size_t s_count = layers[0].rows(), d = layers[0].cols();
  mixed.resize(s_count, d);
  for (std::size_t s = 0; s < s_count; ++s) {
    for (std::size_t c = 0; c < d; ++c) {
      double v = 0.0;
      for (std::size_t l = 0; l < layers.size(); ++l) v += layer_probs[l] * layers[l](s, c);
      mixed(s, c) = v;
    }
  }
  alpha.assign(s_count, 0.0);
  out.resize(alignment.size(), d);
  for (std::size_t t = 0; t < alignment.size(); ++t) {
    if (alignment[t].empty()) throw Error("pool: token " + std::to_string(t) + " has zero subwords");
    double z = 0.0;
    for (int s : alignment[t]) {
      double v = 0.0;
      for (std::size_t c = 0; c < d; ++c) v += score[c] * mixed(s, c);
      alpha[s] = std::exp(v);
      z += alpha[s];
    }
    for (int s : alignment[t]) {
      alpha[s] /= z;
      for (std::size_t c = 0; c < d; ++c) out(t, c) += alpha[s] * mixed(s, c);
    }
  }
}

void pool_backward(const Matrix& grad_out, std::span<const Matrix> layers,
                   const std::vector<std::vector<int>>& alignment,
                   std::span<const double> score, const Matrix& mixed,
                   const std::vector<double>& alpha, std::span<double> d_layer_probs,
                   std::span<double> d_score) {
  const std::size_t d = mixed.cols();
  for (std::size_t t = 0; t < alignment.size(); ++t) {
    for (int s : alignment[t]) {
      // d out_t / d raw_s through the softmax: alpha_s * (mixed_s - out_t)
      double dr = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        double out_tc = 0.0;
        for (int s2 : alignment[t]) out_tc += alpha[s2] * mixed(s2, c);
        dr += grad_out(t, c) * alpha[s] * (mixed(s, c) - out_tc);
      }
      for (std::size_t c = 0; c < d; ++c) {
        const double dm = alpha[s] * grad_out(t, c) + dr * score[c];
        d_score[c] += dr * mixed(s, c);
        for (std::size_t l = 0; l < layers.size(); ++l) d_layer_probs[l] += dm * layers[l](s, c);
      }
    }
  }
}

}  // namespace jsee::kernels::serial
