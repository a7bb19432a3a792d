#include "jsee/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "jsee/common.hpp"

namespace jsee::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::int64_t kParallelWork = 1 << 15;

struct GemmShape {
  std::size_t m, k, n;
};

GemmShape gemm_shape(const Matrix& a, Trans ta, const Matrix& b, Trans tb) {
  const std::size_t m = ta == Trans::No ? a.rows() : a.cols();
  const std::size_t k = ta == Trans::No ? a.cols() : a.rows();
  const std::size_t kb = tb == Trans::No ? b.rows() : b.cols();
  const std::size_t n = tb == Trans::No ? b.cols() : b.rows();
  if (k != kb) throw Error("gemm: inner dimensions differ");
  return {m, k, n};
}

void prepare_output(Matrix& c, std::size_t m, std::size_t n, bool accumulate) {
  if (accumulate) {
    if (c.rows() != m || c.cols() != n) throw Error("gemm: accumulator has the wrong shape");
  } else {
    c.resize(m, n);
  }
}

}  // namespace

void gemm(const Matrix& a, Trans ta, const Matrix& b, Trans tb, Matrix& c, bool accumulate) {
  const auto [m, k, n] = gemm_shape(a, ta, b, tb);
  prepare_output(c, m, n, accumulate);
  const std::int64_t rows = static_cast<std::int64_t>(m);
  const bool big = static_cast<std::int64_t>(m * n * k) > kParallelWork;
  const double* ad = a.data();
  const double* bd = b.data();
  const std::size_t lda = a.cols();
  const std::size_t ldb = b.cols();
  if (tb == Trans::No) {
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t i = 0; i < rows; ++i) {
      double* crow = c.data() + static_cast<std::size_t>(i) * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = ta == Trans::No ? ad[i * lda + p] : ad[p * lda + i];
        if (aip == 0.0) continue;
        const double* brow = bd + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  } else {
#pragma omp parallel for schedule(static) if (big)
    for (std::int64_t i = 0; i < rows; ++i) {
      double* crow = c.data() + static_cast<std::size_t>(i) * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* brow = bd + j * ldb;
        double s = 0.0;
        if (ta == Trans::No) {
          const double* arow = ad + i * lda;
          for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        } else {
          for (std::size_t p = 0; p < k; ++p) s += ad[p * lda + i] * brow[p];
        }
        crow[j] += s;
      }
    }
  }
}

namespace {

void check_biaffine(const Matrix& x1, const Matrix& x2, const Matrix& u, const Matrix& w,
                    std::size_t bias_size, std::size_t channels) {
  if (channels == 0) throw Error("biaffine: zero channels");
  if (u.rows() != x1.cols() || u.cols() != channels * x2.cols()) {
    throw Error("biaffine: bilinear tensor shape mismatch");
  }
  if (!w.empty() && (w.rows() != channels || w.cols() != x1.cols() + x2.cols())) {
    throw Error("biaffine: linear weight shape mismatch");
  }
  if (bias_size != 0 && bias_size != channels) throw Error("biaffine: bias shape mismatch");
}

// lin(i, k) = sum_a x(i, a) * w(k, offset + a)
Matrix linear_part(const Matrix& x, const Matrix& w, std::size_t offset, std::size_t channels) {
  Matrix lin(x.rows(), channels);
  if (w.empty()) return lin;
  const std::int64_t rows = static_cast<std::int64_t>(x.rows());
#pragma omp parallel for schedule(static) if (rows * channels * x.cols() > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    auto xi = x.row(i);
    for (std::size_t kk = 0; kk < channels; ++kk) {
      const double* wk = w.data() + kk * w.cols() + offset;
      double s = 0.0;
      for (std::size_t a = 0; a < xi.size(); ++a) s += xi[a] * wk[a];
      lin(i, kk) = s;
    }
  }
  return lin;
}

}  // namespace

void biaffine_forward(const Matrix& x1, const Matrix& x2, const Matrix& u, const Matrix& w,
                      std::span<const double> bias, std::size_t channels, Matrix& out) {
  check_biaffine(x1, x2, u, w, bias.size(), channels);
  const std::size_t n1 = x1.rows(), n2 = x2.rows(), d2 = x2.cols(), kc = channels;
  Matrix t1;
  gemm(x1, Trans::No, u, Trans::No, t1);
  Matrix lin1 = linear_part(x1, w, 0, kc);
  Matrix lin2 = linear_part(x2, w, x1.cols(), kc);
  out.resize(n1, n2 * kc);
  const std::int64_t rows = static_cast<std::int64_t>(n1);
#pragma omp parallel for schedule(static) if (rows * n2 * kc * d2 > kParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* ti = t1.data() + static_cast<std::size_t>(i) * kc * d2;
    for (std::size_t j = 0; j < n2; ++j) {
      const double* xj = x2.data() + j * d2;
      for (std::size_t kk = 0; kk < kc; ++kk) {
        const double* tik = ti + kk * d2;
        double s = 0.0;
        for (std::size_t b = 0; b < d2; ++b) s += tik[b] * xj[b];
        s += lin1(i, kk) + lin2(j, kk);
        if (!bias.empty()) s += bias[kk];
        out(i, j * kc + kk) = s;
      }
    }
  }
}

void biaffine_backward(const Matrix& grad_out, const Matrix& x1, const Matrix& x2,
                       const Matrix& u, const Matrix& w, std::size_t channels,
                       const BiaffineGrads& grads) {
  check_biaffine(x1, x2, u, w, grads.bias.size(), channels);
  const std::size_t n1 = x1.rows(), n2 = x2.rows(), d1 = x1.cols(), d2 = x2.cols(), kc = channels;
  if (grad_out.rows() != n1 || grad_out.cols() != n2 * kc) {
    throw Error("biaffine: gradient shape mismatch");
  }
  const bool need_t1 = grads.x1 || grads.u;
  const bool par = static_cast<std::int64_t>(n1 * n2 * kc * d2) > kParallelWork;

  if (need_t1) {
    // dT1(i, k*D2 + b) = sum_j g(i, j, k) * x2(j, b)
    Matrix dt1(n1, kc * d2);
    const std::int64_t rows = static_cast<std::int64_t>(n1);
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t i = 0; i < rows; ++i) {
      double* di = dt1.data() + static_cast<std::size_t>(i) * kc * d2;
      for (std::size_t j = 0; j < n2; ++j) {
        const double* xj = x2.data() + j * d2;
        for (std::size_t kk = 0; kk < kc; ++kk) {
          const double g = grad_out(i, j * kc + kk);
          if (g == 0.0) continue;
          double* dik = di + kk * d2;
          for (std::size_t b = 0; b < d2; ++b) dik[b] += g * xj[b];
        }
      }
    }
    if (grads.u) gemm(x1, Trans::Yes, dt1, Trans::No, *grads.u, true);
    if (grads.x1) gemm(dt1, Trans::No, u, Trans::Yes, *grads.x1, true);
  }
  if (grads.x2) {
    // dx2(j, b) += sum_{i,k} g(i, j, k) * T1(i, k*D2 + b)
    Matrix t1;
    gemm(x1, Trans::No, u, Trans::No, t1);
    const std::int64_t cols = static_cast<std::int64_t>(n2);
#pragma omp parallel for schedule(static) if (par)
    for (std::int64_t j = 0; j < cols; ++j) {
      double* dj = grads.x2->data() + static_cast<std::size_t>(j) * d2;
      for (std::size_t i = 0; i < n1; ++i) {
        const double* ti = t1.data() + i * kc * d2;
        for (std::size_t kk = 0; kk < kc; ++kk) {
          const double g = grad_out(i, j * kc + kk);
          if (g == 0.0) continue;
          const double* tik = ti + kk * d2;
          for (std::size_t b = 0; b < d2; ++b) dj[b] += g * tik[b];
        }
      }
    }
  }

  const bool has_linear = !w.empty();
  if (!has_linear && grads.bias.empty()) return;
  // Row and column sums of the gradient per channel.
  Matrix g1(n1, kc), g2(n2, kc);
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t kk = 0; kk < kc; ++kk) {
        const double g = grad_out(i, j * kc + kk);
        g1(i, kk) += g;
        g2(j, kk) += g;
      }
    }
  }
  if (!grads.bias.empty()) {
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t kk = 0; kk < kc; ++kk) grads.bias[kk] += g1(i, kk);
    }
  }
  if (!has_linear) return;
  if (grads.w) {
    for (std::size_t kk = 0; kk < kc; ++kk) {
      double* wk = grads.w->data() + kk * (d1 + d2);
      for (std::size_t i = 0; i < n1; ++i) {
        const double g = g1(i, kk);
        for (std::size_t a = 0; a < d1; ++a) wk[a] += g * x1(i, a);
      }
      for (std::size_t j = 0; j < n2; ++j) {
        const double g = g2(j, kk);
        for (std::size_t b = 0; b < d2; ++b) wk[d1 + b] += g * x2(j, b);
      }
    }
  }
  if (grads.x1) {
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t kk = 0; kk < kc; ++kk) {
        const double g = g1(i, kk);
        for (std::size_t a = 0; a < d1; ++a) (*grads.x1)(i, a) += g * w(kk, a);
      }
    }
  }
  if (grads.x2) {
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t kk = 0; kk < kc; ++kk) {
        const double g = g2(j, kk);
        for (std::size_t b = 0; b < d2; ++b) (*grads.x2)(j, b) += g * w(kk, d1 + b);
      }
    }
  }
}

namespace {

void check_pool(std::span<const Matrix> layers, const std::vector<std::vector<int>>& alignment,
                std::size_t n_probs, std::size_t score_size) {
  if (layers.empty()) throw Error("pool: no layers");
  const std::size_t s = layers[0].rows(), d = layers[0].cols();
  for (const auto& l : layers) {
    if (l.rows() != s || l.cols() != d) throw Error("pool: layers differ in shape");
  }
  if (n_probs != layers.size()) throw Error("pool: layer weight count mismatch");
  if (score_size != d) throw Error("pool: attention vector size mismatch");
  for (std::size_t t = 0; t < alignment.size(); ++t) {
    if (alignment[t].empty()) {
      throw Error("pool: token " + std::to_string(t) + " has zero subwords");
    }
    for (int sw : alignment[t]) {
      if (sw < 0 || static_cast<std::size_t>(sw) >= s) throw Error("pool: subword index out of range");
    }
  }
}

}  // namespace

void pool_forward(std::span<const Matrix> layers, const std::vector<std::vector<int>>& alignment,
                  std::span<const double> layer_probs, std::span<const double> score, Matrix& out,
                  Matrix& mixed, std::vector<double>& alpha) {
  check_pool(layers, alignment, layer_probs.size(), score.size());
  const std::size_t s_count = layers[0].rows(), d = layers[0].cols();
  mixed.resize(s_count, d);
  const std::int64_t subwords = static_cast<std::int64_t>(s_count);
  const bool par = static_cast<std::int64_t>(s_count * d * layers.size()) > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t s = 0; s < subwords; ++s) {
    double* ms = mixed.data() + static_cast<std::size_t>(s) * d;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const double p = layer_probs[l];
      const double* xs = layers[l].data() + static_cast<std::size_t>(s) * d;
      for (std::size_t c = 0; c < d; ++c) ms[c] += p * xs[c];
    }
  }
  alpha.assign(s_count, 0.0);
  out.resize(alignment.size(), d);
  const std::int64_t tokens = static_cast<std::int64_t>(alignment.size());
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t t = 0; t < tokens; ++t) {
    const auto& subs = alignment[t];
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> raw(subs.size());
    for (std::size_t m = 0; m < subs.size(); ++m) {
      auto ms = mixed.row(subs[m]);
      double v = 0.0;
      for (std::size_t c = 0; c < d; ++c) v += score[c] * ms[c];
      raw[m] = v;
      mx = std::max(mx, v);
    }
    double z = 0.0;
    for (double& v : raw) {
      v = std::exp(v - mx);
      z += v;
    }
    double* ot = out.data() + static_cast<std::size_t>(t) * d;
    for (std::size_t m = 0; m < subs.size(); ++m) {
      const double a = raw[m] / z;
      alpha[subs[m]] = a;
      auto ms = mixed.row(subs[m]);
      for (std::size_t c = 0; c < d; ++c) ot[c] += a * ms[c];
    }
  }
}

void pool_backward(const Matrix& grad_out, std::span<const Matrix> layers,
                   const std::vector<std::vector<int>>& alignment,
                   std::span<const double> score, const Matrix& mixed,
                   const std::vector<double>& alpha, std::span<double> d_layer_probs,
                   std::span<double> d_score) {
  check_pool(layers, alignment, d_layer_probs.size(), score.size());
  const std::size_t s_count = mixed.rows(), d = mixed.cols();
  Matrix d_mixed(s_count, d);
  std::vector<double> d_raw(s_count, 0.0);
  const std::int64_t tokens = static_cast<std::int64_t>(alignment.size());
  const bool par = static_cast<std::int64_t>(s_count * d * layers.size()) > kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t t = 0; t < tokens; ++t) {
    const auto& subs = alignment[t];
    auto g = grad_out.row(t);
    std::vector<double> dots(subs.size());
    double avg = 0.0;
    for (std::size_t m = 0; m < subs.size(); ++m) {
      auto ms = mixed.row(subs[m]);
      double v = 0.0;
      for (std::size_t c = 0; c < d; ++c) v += g[c] * ms[c];
      dots[m] = v;
      avg += alpha[subs[m]] * v;
    }
    for (std::size_t m = 0; m < subs.size(); ++m) {
      const int s = subs[m];
      const double a = alpha[s];
      const double dr = a * (dots[m] - avg);
      d_raw[s] = dr;
      auto dm = d_mixed.row(s);
      for (std::size_t c = 0; c < d; ++c) dm[c] += a * g[c] + dr * score[c];
    }
  }
  for (std::size_t s = 0; s < s_count; ++s) {
    if (d_raw[s] == 0.0) continue;
    auto ms = mixed.row(s);
    for (std::size_t c = 0; c < d; ++c) d_score[c] += d_raw[s] * ms[c];
  }
  const std::int64_t n_layers = static_cast<std::int64_t>(layers.size());
#pragma omp parallel for schedule(static) if (par)
  for (std::int64_t l = 0; l < n_layers; ++l) {
    double acc = 0.0;
    const double* xl = layers[l].data();
    const double* dm = d_mixed.data();
    for (std::size_t i = 0; i < s_count * d; ++i) acc += dm[i] * xl[i];
    d_layer_probs[l] += acc;
  }
}

}  // namespace jsee::kernels
