#include "jsee/neural.hpp"

#include <algorithm>
#include <cmath>

#include "jsee/common.hpp"
#include "jsee/kernels.hpp"

namespace jsee {

void EmbeddingBundle::validate() const {
  const std::string& sid = sentence_id;
  if (layers.empty()) throw SchemaError(sid, "layers", "bundle has no layers");
  const std::size_t s = layers[0].rows(), d = layers[0].cols();
  if (d == 0) throw SchemaError(sid, "dim", "zero embedding dimension");
  for (const auto& l : layers) {
    if (l.rows() != s || l.cols() != d) throw SchemaError(sid, "vectors", "ragged layer shapes");
    for (double v : l.values()) {
      if (!std::isfinite(v)) throw SchemaError(sid, "vectors", "non-finite value");
    }
  }
  if (s < alignment.size()) throw SchemaError(sid, "alignment", "fewer subwords than tokens");
  std::vector<int> owner(s, -1);
  for (std::size_t t = 0; t < alignment.size(); ++t) {
    if (alignment[t].empty()) {
      throw SchemaError(sid, "alignment", "token " + std::to_string(t) + " has zero subwords");
    }
    for (int sw : alignment[t]) {
      if (sw < 0 || static_cast<std::size_t>(sw) >= s) {
        throw SchemaError(sid, "alignment", "subword index out of range");
      }
      if (owner[sw] != -1) {
        throw SchemaError(sid, "alignment",
                          "subword " + std::to_string(sw) + " belongs to two tokens");
      }
      owner[sw] = static_cast<int>(t);
    }
  }
}

std::vector<double> softmax(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

Matrix pool_embeddings(const EmbeddingBundle& bundle, const EncoderPoolParams& params) {
  if (params.layer_weights.cols() != bundle.layer_count()) {
    throw Error("pool_embeddings: layer weight count mismatch");
  }
  std::vector<double> w(params.layer_weights.values().begin(), params.layer_weights.values().end());
  const std::vector<double> probs = softmax(w);
  Matrix out, mixed;
  std::vector<double> alpha;
  kernels::pool_forward(bundle.layers, bundle.alignment, probs, params.subword_score.values(), out,
                        mixed, alpha);
  return out;
}

Matrix bilinear(const Matrix& x1, const Matrix& x2, const Matrix& u, std::size_t channels) {
  Matrix out;
  kernels::biaffine_forward(x1, x2, u, Matrix{}, {}, channels, out);
  return out;
}

Matrix biaffine(const Matrix& x1, const Matrix& x2, const BiaffineParams& params) {
  Matrix out;
  kernels::biaffine_forward(x1, x2, params.u, params.w, params.bias.values(), params.channels, out);
  return out;
}

Matrix fnn(const Matrix& x, const FNNParams& params) {
  Matrix out;
  kernels::gemm(x, kernels::Trans::No, params.weight, kernels::Trans::No, out);
  if (params.bias.rows() != 1 || params.bias.cols() != out.cols()) throw Error("fnn: bias shape");
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = gelu(out(i, j) + params.bias(0, j));
  }
  return out;
}

Matrix init_matrix(std::size_t rows, std::size_t cols, double std_dev, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  // Box-Muller over raw engine bits keeps initialisation identical across
  // standard library implementations.
  auto uniform = [&rng] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
  for (double& v : m.values()) {
    const double u1 = uniform(), u2 = uniform();
    v = std_dev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
  return m;
}

Linear Linear::create(ParamStore& store, const std::string& name, std::size_t in,
                      std::size_t out, ParamGroup group, std::mt19937_64& rng) {
  Linear l;
  l.weight = store.add(name + ".weight", init_matrix(in, out, 1.0 / std::sqrt(double(in)), rng),
                       group);
  l.bias = store.add(name + ".bias", Matrix(1, out), group);
  return l;
}

Var Linear::apply(Tape& t, const ParamStore& store, Var x) const {
  return add_row(matmul(x, t.param(store, weight)), t.param(store, bias));
}

FNN FNN::create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                ParamGroup group, std::mt19937_64& rng) {
  return {Linear::create(store, name, in, out, group, rng)};
}

Var FNN::apply(Tape& t, const ParamStore& store, Var x) const {
  return gelu(linear.apply(t, store, x));
}

FNNParams FNN::snapshot(const ParamStore& store) const {
  return {store[linear.weight].value, store[linear.bias].value};
}

Biaffine Biaffine::create(ParamStore& store, const std::string& name, std::size_t d1,
                          std::size_t d2, std::size_t channels, std::mt19937_64& rng) {
  Biaffine b;
  b.channels = channels;
  b.u = store.add(name + ".u", init_matrix(d1, channels * d2, 1.0 / std::sqrt(double(d1 * d2)), rng),
                  ParamGroup::Decoder);
  b.w = store.add(name + ".w", init_matrix(channels, d1 + d2, 1.0 / std::sqrt(double(d1 + d2)), rng),
                  ParamGroup::Decoder);
  b.bias = store.add(name + ".bias", Matrix(1, channels), ParamGroup::Decoder);
  return b;
}

Var Biaffine::apply(Tape& t, const ParamStore& store, Var x1, Var x2) const {
  return jsee::biaffine(x1, x2, t.param(store, u), t.param(store, w), t.param(store, bias),
                        channels);
}

BiaffineParams Biaffine::snapshot(const ParamStore& store) const {
  return {store[u].value, store[w].value, store[bias].value, channels};
}

LayerNorm LayerNorm::create(ParamStore& store, const std::string& name, std::size_t dim) {
  LayerNorm ln;
  ln.gain = store.add(name + ".gain", Matrix(1, dim, 1.0), ParamGroup::Decoder);
  ln.bias = store.add(name + ".bias", Matrix(1, dim), ParamGroup::Decoder);
  return ln;
}

Var LayerNorm::apply(Tape& t, const ParamStore& store, Var x) const {
  return layer_norm(x, t.param(store, gain), t.param(store, bias));
}

EncoderPool EncoderPool::create(ParamStore& store, std::size_t layers, std::size_t dim) {
  EncoderPool p;
  p.layer_weights = store.add("pool.layer_weights", Matrix(1, layers), ParamGroup::Encoder);
  p.subword_score = store.add("pool.subword_score", Matrix(1, dim), ParamGroup::Encoder);
  return p;
}

Var EncoderPool::apply(Tape& t, const ParamStore& store, const EmbeddingBundle& bundle) const {
  return pool(bundle.layers, bundle.alignment, t.param(store, layer_weights),
              t.param(store, subword_score));
}

EncoderPoolParams EncoderPool::snapshot(const ParamStore& store) const {
  return {store[layer_weights].value, store[subword_score].value};
}

}  // namespace jsee
