#include "jsee/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "jsee/common.hpp"
#include "jsee/kernels.hpp"

namespace jsee {

using kernels::Trans;

std::size_t ParamStore::add(std::string name, Matrix init, ParamGroup group) {
  for (const auto& p : params_) {
    if (p.name == name) throw Error("duplicate parameter name '" + name + "'");
  }
  params_.push_back({std::move(name), std::move(init), group});
  return params_.size() - 1;
}

std::size_t ParamStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw Error("unknown parameter '" + name + "'");
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<Matrix> ParamStore::zero_grads() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.value.rows(), p.value.cols());
  return out;
}

const Matrix& Var::value() const { return tape->value(id); }

Var Tape::constant(Matrix m) { return record(std::move(m), false, nullptr); }

Var Tape::input(Matrix m) { return record(std::move(m), true, nullptr); }

Var Tape::param(const ParamStore& store, std::size_t index) {
  Node n;
  n.ref = &store[index].value;
  n.requires_grad = true;
  n.param = static_cast<int>(index);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.owned;
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Matrix& v = value(id);
    n.grad.resize(v.rows(), v.cols());
  }
  return n.grad;
}

const Matrix& Tape::grad(Var v) const { return nodes_[v.id].grad; }

void Tape::backward(Var loss, std::vector<Matrix>* param_grads) {
  if (loss.tape != this) throw Error("backward: loss belongs to another tape");
  const Matrix& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) throw Error("backward: loss must be 1x1");
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)(0, 0) += 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param >= 0 && param_grads) (*param_grads)[n.param] += n.grad;
  }
}

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error("op on an invalid variable");
  return *a.tape;
}

bool any_grad(Tape& t, std::initializer_list<Var> vs) {
  for (Var v : vs) {
    if (v.valid() && t.requires_grad(v.id)) return true;
  }
  return false;
}

void check_same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("variables recorded on different tapes");
}

}  // namespace

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  Matrix out;
  kernels::gemm(a.value(), Trans::No, b.value(), Trans::No, out);
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) kernels::gemm(g, Trans::No, tp.value(ib), Trans::Yes, tp.grad(ia), true);
    if (tp.requires_grad(ib)) kernels::gemm(tp.value(ia), Trans::Yes, g, Trans::No, tp.grad(ib), true);
  });
}

Var matmul_nt(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  Matrix out;
  kernels::gemm(a.value(), Trans::No, b.value(), Trans::Yes, out);
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) kernels::gemm(g, Trans::No, tp.value(ib), Trans::No, tp.grad(ia), true);
    if (tp.requires_grad(ib)) kernels::gemm(g, Trans::Yes, tp.value(ia), Trans::No, tp.grad(ib), true);
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b);
  Tape& t = tape_of(a);
  if (!a.value().same_shape(b.value())) throw Error("add: shape mismatch");
  Matrix out = a.value();
  out += b.value();
  const int ia = a.id, ib = b.id;
  return t.record(std::move(out), any_grad(t, {a, b}), [ia, ib](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad(ia) += g;
    if (tp.requires_grad(ib)) tp.grad(ib) += g;
  });
}

Var add_row(Var a, Var row) {
  check_same_tape(a, row);
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) throw Error("add_row: shape mismatch");
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += rv(0, j);
  }
  const int ia = a.id, ir = row.id;
  return t.record(std::move(out), any_grad(t, {a, row}), [ia, ir](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad(ia) += g;
    if (tp.requires_grad(ir)) {
      Matrix& gr = tp.grad(ir);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      }
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  out *= s;
  const int ia = a.id;
  return t.record(std::move(out), any_grad(t, {a}), [ia, s](Tape& tp, int self) {
    Matrix g = tp.grad(self);
    g *= s;
    tp.grad(ia) += g;
  });
}

Var gelu(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    out.data()[i] = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  }
  const int ia = a.id;
  return t.record(std::move(out), any_grad(t, {a}), [ia](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    const Matrix& xv = tp.value(ia);
    Matrix& gx = tp.grad(ia);
    constexpr double kInvSqrt2Pi = 0.3989422804014327;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv.data()[i];
      const double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx.data()[i] += g.data()[i] * (cdf + v * pdf);
    }
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    auto yr = out.row(i);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double z = 0.0;
    for (std::size_t j = 0; j < xr.size(); ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (double& v : yr) v /= z;
  }
  const int ia = a.id;
  return t.record(std::move(out), any_grad(t, {a}), [ia](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    const Matrix& y = tp.value(self);
    Matrix& gx = tp.grad(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) gx(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var layer_norm(Var a, Var gain, Var bias, double eps) {
  check_same_tape(a, gain);
  check_same_tape(a, bias);
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  const std::size_t n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n) {
    throw Error("layer_norm: parameter shape mismatch");
  }
  Matrix xhat(x.rows(), n);
  std::vector<double> inv_std(x.rows());
  Matrix out(x.rows(), n);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (x(i, j) - mean) * (x(i, j) - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      xhat(i, j) = (x(i, j) - mean) * inv_std[i];
      out(i, j) = xhat(i, j) * gain.value()(0, j) + bias.value()(0, j);
    }
  }
  const int ia = a.id, ig = gain.id, ib = bias.id;
  return t.record(std::move(out), any_grad(t, {a, gain, bias}),
                  [ia, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                                   int self) {
                    const Matrix& g = tp.grad(self);
                    const Matrix& gv = tp.value(ig);
                    const std::size_t cols = g.cols();
                    if (tp.requires_grad(ig) || tp.requires_grad(ib)) {
                      Matrix& gg = tp.grad(ig);
                      Matrix& gb = tp.grad(ib);
                      for (std::size_t i = 0; i < g.rows(); ++i) {
                        for (std::size_t j = 0; j < cols; ++j) {
                          gg(0, j) += g(i, j) * xhat(i, j);
                          gb(0, j) += g(i, j);
                        }
                      }
                    }
                    if (!tp.requires_grad(ia)) return;
                    Matrix& gx = tp.grad(ia);
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      double m1 = 0.0, m2 = 0.0;
                      for (std::size_t j = 0; j < cols; ++j) {
                        const double dxh = g(i, j) * gv(0, j);
                        m1 += dxh;
                        m2 += dxh * xhat(i, j);
                      }
                      m1 /= static_cast<double>(cols);
                      m2 /= static_cast<double>(cols);
                      for (std::size_t j = 0; j < cols; ++j) {
                        const double dxh = g(i, j) * gv(0, j);
                        gx(i, j) += inv_std[i] * (dxh - m1 - xhat(i, j) * m2);
                      }
                    }
                  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool needs = false;
  std::vector<int> ids;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    if (p.rows() != rows) throw Error("concat_cols: row count mismatch");
    cols += p.cols();
    needs = needs || t.requires_grad(p.id);
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + off);
    }
    off += v.cols();
  }
  return t.record(std::move(out), needs, [ids](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t c = tp.value(id).cols();
      if (tp.requires_grad(id)) {
        Matrix& gi = tp.grad(id);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) gi(i, j) += g(i, off + j);
        }
      }
      off += c;
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  if (start + count > x.cols()) throw Error("slice_cols: out of range");
  Matrix out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, start + j);
  }
  const int ia = a.id;
  return t.record(std::move(out), any_grad(t, {a}), [ia, start, count](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Matrix& gx = tp.grad(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      for (std::size_t j = 0; j < count; ++j) gx(i, start + j) += g(i, j);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool needs = false;
  std::vector<int> ids;
  for (Var p : parts) {
    check_same_tape(parts[0], p);
    if (p.cols() != cols) throw Error("concat_rows: column count mismatch");
    rows += p.rows();
    needs = needs || t.requires_grad(p.id);
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& v = p.value();
    std::copy(v.values().begin(), v.values().end(), out.data() + off * cols);
    off += v.rows();
  }
  return t.record(std::move(out), needs, [ids](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    std::size_t off = 0;
    for (int id : ids) {
      const std::size_t r = tp.value(id).rows();
      if (tp.requires_grad(id)) {
        Matrix& gi = tp.grad(id);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) gi(i, j) += g(off + i, j);
        }
      }
      off += r;
    }
  });
}

Var gather_rows(Var a, const std::vector<int>& rows) {
  Tape& t = tape_of(a);
  const Matrix& x = a.value();
  Matrix out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= x.rows()) {
      throw Error("gather_rows: index out of range");
    }
    auto src = x.row(rows[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const int ia = a.id;
  return t.record(std::move(out), any_grad(t, {a}), [ia, rows](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Matrix& gx = tp.grad(ia);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t j = 0; j < g.cols(); ++j) gx(rows[r], j) += g(r, j);
    }
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& t = tape_of(a);
  Matrix out = a.value();
  out.reshape(rows, cols);
  const int ia = a.id;
  return t.record(std::move(out), any_grad(t, {a}), [ia](Tape& tp, int self) {
    Matrix g = tp.grad(self);
    const Matrix& x = tp.value(ia);
    g.reshape(x.rows(), x.cols());
    tp.grad(ia) += g;
  });
}

Var dropout(Var a, double p) {
  Tape& t = tape_of(a);
  if (!t.training || t.rng == nullptr || p <= 0.0) return a;
  const Matrix& x = a.value();
  Matrix mask(x.rows(), x.cols());
  const double keep = 1.0 - p;
  // Top 53 bits give a uniform double in [0, 1) independent of the stdlib.
  for (double& m : mask.values()) {
    const double u = static_cast<double>((*t.rng)() >> 11) * 0x1.0p-53;
    m = u < keep ? 1.0 / keep : 0.0;
  }
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  const int ia = a.id;
  return t.record(std::move(out), any_grad(t, {a}),
                  [ia, mask = std::move(mask)](Tape& tp, int self) {
                    const Matrix& g = tp.grad(self);
                    Matrix& gx = tp.grad(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) {
                      gx.data()[i] += g.data()[i] * mask.data()[i];
                    }
                  });
}

Var sum_scalars(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw Error("sum_scalars: no inputs");
  Tape& t = tape_of(scalars[0]);
  double total = 0.0;
  bool needs = false;
  std::vector<int> ids;
  for (Var s : scalars) {
    if (s.rows() != 1 || s.cols() != 1) throw Error("sum_scalars: inputs must be 1x1");
    total += s.value()(0, 0);
    needs = needs || t.requires_grad(s.id);
    ids.push_back(s.id);
  }
  return t.record(Matrix(1, 1, total), needs, [ids](Tape& tp, int self) {
    const double g = tp.grad(self)(0, 0);
    for (int id : ids) {
      if (tp.requires_grad(id)) tp.grad(id)(0, 0) += g;
    }
  });
}

Var biaffine(Var x1, Var x2, Var u, Var w, Var bias, std::size_t channels) {
  check_same_tape(x1, x2);
  check_same_tape(x1, u);
  Tape& t = tape_of(x1);
  static const Matrix kEmpty;
  const Matrix& wv = w.valid() ? w.value() : kEmpty;
  std::span<const double> bv;
  if (bias.valid()) bv = bias.value().values();
  Matrix out;
  kernels::biaffine_forward(x1.value(), x2.value(), u.value(), wv, bv, channels, out);
  const int i1 = x1.id, i2 = x2.id, iu = u.id, iw = w.valid() ? w.id : -1,
            ib = bias.valid() ? bias.id : -1;
  const bool needs = any_grad(t, {x1, x2, u, w, bias});
  return t.record(std::move(out), needs, [=](Tape& tp, int self) {
    kernels::BiaffineGrads g;
    if (tp.requires_grad(i1)) g.x1 = &tp.grad(i1);
    if (tp.requires_grad(i2)) g.x2 = &tp.grad(i2);
    if (tp.requires_grad(iu)) g.u = &tp.grad(iu);
    if (iw >= 0 && tp.requires_grad(iw)) g.w = &tp.grad(iw);
    if (ib >= 0 && tp.requires_grad(ib)) g.bias = tp.grad(ib).values();
    kernels::biaffine_backward(tp.grad(self), tp.value(i1), tp.value(i2), tp.value(iu),
                               iw >= 0 ? tp.value(iw) : kEmpty, channels, g);
  });
}

Var pool(const std::vector<Matrix>& layers, const std::vector<std::vector<int>>& alignment,
         Var layer_weights, Var score) {
  check_same_tape(layer_weights, score);
  Tape& t = tape_of(layer_weights);
  const Matrix& wv = layer_weights.value();
  if (wv.rows() != 1 || wv.cols() != layers.size()) throw Error("pool: layer weight shape mismatch");
  std::vector<double> probs(wv.cols());
  const double mx = *std::max_element(wv.values().begin(), wv.values().end());
  double z = 0.0;
  for (std::size_t l = 0; l < probs.size(); ++l) {
    probs[l] = std::exp(wv(0, l) - mx);
    z += probs[l];
  }
  for (double& p : probs) p /= z;
  Matrix out, mixed;
  std::vector<double> alpha;
  kernels::pool_forward(layers, alignment, probs, score.value().values(), out, mixed, alpha);
  const int iw = layer_weights.id, is = score.id;
  return t.record(
      std::move(out), any_grad(t, {layer_weights, score}),
      [&layers, &alignment, iw, is, probs, mixed = std::move(mixed), alpha = std::move(alpha)](
          Tape& tp, int self) {
        std::vector<double> d_probs(probs.size(), 0.0);
        std::vector<double> d_score(tp.value(is).size(), 0.0);
        kernels::pool_backward(tp.grad(self), layers, alignment, tp.value(is).values(), mixed,
                               alpha, d_probs, d_score);
        if (tp.requires_grad(is)) {
          Matrix& gs = tp.grad(is);
          for (std::size_t c = 0; c < d_score.size(); ++c) gs.data()[c] += d_score[c];
        }
        if (tp.requires_grad(iw)) {
          double dot = 0.0;
          for (std::size_t l = 0; l < probs.size(); ++l) dot += probs[l] * d_probs[l];
          Matrix& gw = tp.grad(iw);
          for (std::size_t l = 0; l < probs.size(); ++l) {
            gw(0, l) += probs[l] * (d_probs[l] - dot);
          }
        }
      });
}

namespace {

// log-sum-exp and softmax of a contiguous run of logits.
double log_softmax_into(const double* x, std::size_t n, double* probs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) mx = std::max(mx, x[k]);
  double z = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    probs[k] = std::exp(x[k] - mx);
    z += probs[k];
  }
  for (std::size_t k = 0; k < n; ++k) probs[k] /= z;
  return mx + std::log(z);
}

}  // namespace

Var cross_entropy(Var logits, const std::vector<int>& targets) {
  Tape& t = tape_of(logits);
  const Matrix& x = logits.value();
  if (targets.size() != x.rows()) throw Error("cross_entropy: target count mismatch");
  Matrix probs(x.rows(), x.cols());
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (targets[i] < 0) continue;
    if (static_cast<std::size_t>(targets[i]) >= x.cols()) throw Error("cross_entropy: bad target");
    const double lse = log_softmax_into(x.row(i).data(), x.cols(), probs.row(i).data());
    total += lse - x(i, targets[i]);
    ++count;
  }
  const double n = count ? static_cast<double>(count) : 1.0;
  const int ia = logits.id;
  return t.record(Matrix(1, 1, total / n), any_grad(t, {logits}),
                  [ia, targets, probs = std::move(probs), n](Tape& tp, int self) {
                    const double g = tp.grad(self)(0, 0) / n;
                    Matrix& gx = tp.grad(ia);
                    for (std::size_t i = 0; i < probs.rows(); ++i) {
                      if (targets[i] < 0) continue;
                      for (std::size_t k = 0; k < probs.cols(); ++k) {
                        const double y = static_cast<int>(k) == targets[i] ? 1.0 : 0.0;
                        gx(i, k) += g * (probs(i, k) - y);
                      }
                    }
                  });
}

Var bce_with_logits(Var logits, const Matrix& targets, const Matrix& mask) {
  Tape& t = tape_of(logits);
  const Matrix& x = logits.value();
  if (!x.same_shape(targets) || !x.same_shape(mask)) throw Error("bce_with_logits: shape mismatch");
  double total = 0.0, count = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double m = mask.data()[i];
    if (m == 0.0) continue;
    const double v = x.data()[i];
    // softplus(v) - y*v, computed stably
    const double softplus = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    total += m * (softplus - targets.data()[i] * v);
    count += m;
  }
  const double n = count > 0.0 ? count : 1.0;
  const int ia = logits.id;
  return t.record(Matrix(1, 1, total / n), any_grad(t, {logits}),
                  [ia, targets, mask, n](Tape& tp, int self) {
                    const double g = tp.grad(self)(0, 0) / n;
                    const Matrix& xv = tp.value(ia);
                    Matrix& gx = tp.grad(ia);
                    for (std::size_t i = 0; i < xv.size(); ++i) {
                      const double m = mask.data()[i];
                      if (m == 0.0) continue;
                      const double sig = 1.0 / (1.0 + std::exp(-xv.data()[i]));
                      gx.data()[i] += g * m * (sig - targets.data()[i]);
                    }
                  });
}

Var cell_cross_entropy(Var logits, std::size_t channels, const std::vector<CellTarget>& cells) {
  Tape& t = tape_of(logits);
  const Matrix& x = logits.value();
  if (channels == 0 || x.cols() % channels != 0) throw Error("cell_cross_entropy: bad channels");
  std::vector<double> probs(cells.size() * channels);
  double total = 0.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    if (cell.label < 0 || static_cast<std::size_t>(cell.label) >= channels) {
      throw Error("cell_cross_entropy: bad label");
    }
    const double* base = x.row(cell.i).data() + static_cast<std::size_t>(cell.j) * channels;
    const double lse = log_softmax_into(base, channels, probs.data() + c * channels);
    total += lse - base[cell.label];
  }
  const double n = cells.empty() ? 1.0 : static_cast<double>(cells.size());
  const int ia = logits.id;
  return t.record(Matrix(1, 1, total / n), any_grad(t, {logits}),
                  [ia, channels, cells, probs = std::move(probs), n](Tape& tp, int self) {
                    const double g = tp.grad(self)(0, 0) / n;
                    Matrix& gx = tp.grad(ia);
                    for (std::size_t c = 0; c < cells.size(); ++c) {
                      double* base =
                          gx.row(cells[c].i).data() + static_cast<std::size_t>(cells[c].j) * channels;
                      for (std::size_t k = 0; k < channels; ++k) {
                        const double y = static_cast<int>(k) == cells[c].label ? 1.0 : 0.0;
                        base[k] += g * (probs[c * channels + k] - y);
                      }
                    }
                  });
}

}  // namespace jsee
