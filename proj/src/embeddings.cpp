#include "jsee/embeddings.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "jsee/common.hpp"

namespace jsee {

namespace {

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Uniform on [-sqrt(3), sqrt(3)]: zero mean, unit variance.
double unit_uniform(std::uint64_t& state) {
  const double u = static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
  return (2.0 * u - 1.0) * 1.7320508075688772;
}

}  // namespace

HashEmbeddingProvider::HashEmbeddingProvider(HashEmbeddingOptions options) : options_(options) {
  if (options_.layers == 0 || options_.dim == 0 || options_.piece_length == 0) {
    throw Error("hash embeddings need positive layers, dim and piece length");
  }
}

std::vector<std::string> HashEmbeddingProvider::split_pieces(const std::string& token,
                                                             std::size_t piece_length) {
  std::vector<std::string> pieces;
  std::string current;
  std::size_t points = 0;
  for (std::size_t i = 0; i < token.size();) {
    const unsigned char c = static_cast<unsigned char>(token[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : 4;
    len = std::min(len, token.size() - i);
    current.append(token, i, len);
    i += len;
    if (++points == piece_length) {
      pieces.push_back(std::move(current));
      current.clear();
      points = 0;
    }
  }
  if (!current.empty() || pieces.empty()) pieces.push_back(std::move(current));
  return pieces;
}

EmbeddingBundle HashEmbeddingProvider::embed(const Sentence& s) const {
  EmbeddingBundle b;
  b.sentence_id = s.id;
  std::vector<std::string> keys;
  for (const auto& tok : s.tokens) {
    auto pieces = split_pieces(tok.text, options_.piece_length);
    std::vector<int> subs;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
      subs.push_back(static_cast<int>(keys.size()));
      keys.push_back((p == 0 ? "" : "##") + pieces[p]);
    }
    b.alignment.push_back(std::move(subs));
  }
  const std::size_t d = options_.dim;
  b.layers.assign(options_.layers, Matrix(keys.size(), d));
  for (std::size_t sw = 0; sw < keys.size(); ++sw) {
    const std::uint64_t key = fnv1a(keys[sw]) ^ (options_.seed * 0x9E3779B97F4A7C15ull);
    std::uint64_t base_state = key;
    std::vector<double> base(d);
    for (double& v : base) v = unit_uniform(base_state);
    for (std::size_t l = 0; l < options_.layers; ++l) {
      std::uint64_t layer_state = key + 0x632BE59BD9B4E019ull * (l + 1);
      for (std::size_t c = 0; c < d; ++c) {
        b.layers[l](sw, c) = base[c] + 0.5 * unit_uniform(layer_state);
      }
    }
  }
  return b;
}

nlohmann::ordered_json HashEmbeddingProvider::provenance() const {
  return {{"provider", "hash"},
          {"seed", options_.seed},
          {"layers", options_.layers},
          {"dim", options_.dim},
          {"piece_length", options_.piece_length}};
}

nlohmann::ordered_json to_json(const EmbeddingBundle& b) {
  nlohmann::ordered_json j;
  j["sentence_id"] = b.sentence_id;
  j["layers"] = b.layer_count();
  j["dim"] = b.dim();
  j["alignment"] = b.alignment;
  nlohmann::ordered_json vectors = nlohmann::ordered_json::array();
  for (const auto& layer : b.layers) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t s = 0; s < layer.rows(); ++s) {
      rows.push_back(std::vector<double>(layer.row(s).begin(), layer.row(s).end()));
    }
    vectors.push_back(std::move(rows));
  }
  j["vectors"] = std::move(vectors);
  return j;
}

EmbeddingBundle bundle_from_json(const nlohmann::json& j) {
  EmbeddingBundle b;
  try {
    b.sentence_id = j.at("sentence_id").get<std::string>();
    const auto layers = j.at("layers").get<std::size_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    b.alignment = j.at("alignment").get<std::vector<std::vector<int>>>();
    const auto& vectors = j.at("vectors");
    if (!vectors.is_array() || vectors.size() != layers) {
      throw SchemaError(b.sentence_id, "vectors", "expected one entry per layer");
    }
    for (const auto& lj : vectors) {
      Matrix m(lj.size(), dim);
      for (std::size_t s = 0; s < lj.size(); ++s) {
        if (lj[s].size() != dim) throw SchemaError(b.sentence_id, "vectors", "row width != dim");
        for (std::size_t c = 0; c < dim; ++c) m(s, c) = lj[s][c].get<double>();
      }
      b.layers.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(b.sentence_id, "embedding record", e.what());
  }
  b.validate();
  return b;
}

void write_embeddings_file(const std::string& path, const std::vector<EmbeddingBundle>& bundles) {
  std::string out;
  for (const auto& b : bundles) out += to_json(b).dump() + "\n";
  write_file_atomic(path, out);
}

FileEmbeddingProvider::FileEmbeddingProvider(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) throw Error("cannot open embedding file '" + path_ + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("", "line " + std::to_string(line_no), e.what());
    }
    EmbeddingBundle b = bundle_from_json(j);
    if (bundles_.empty()) {
      layers_ = b.layer_count();
      dim_ = b.dim();
    } else if (b.layer_count() != layers_ || b.dim() != dim_) {
      throw SchemaError(b.sentence_id, "layers/dim", "inconsistent with earlier records");
    }
    const std::string id = b.sentence_id;
    if (!bundles_.emplace(id, std::move(b)).second) {
      throw SchemaError(id, "sentence_id", "duplicate embedding record");
    }
  }
}

EmbeddingBundle FileEmbeddingProvider::embed(const Sentence& s) const {
  auto it = bundles_.find(s.id);
  if (it == bundles_.end()) throw Error("no embeddings for sentence '" + s.id + "' in " + path_);
  if (it->second.token_count() != s.tokens.size()) {
    throw Error("alignment mismatch for sentence '" + s.id + "': " +
                std::to_string(it->second.token_count()) + " aligned tokens vs " +
                std::to_string(s.tokens.size()) + " sentence tokens");
  }
  return it->second;
}

nlohmann::ordered_json FileEmbeddingProvider::provenance() const {
  return {{"provider", "file"}, {"path", path_}, {"layers", layers_}, {"dim", dim_}};
}

std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec,
                                                 const HashEmbeddingOptions& hash_options) {
  if (spec == "hash") return std::make_unique<HashEmbeddingProvider>(hash_options);
  if (spec.rfind("file:", 0) == 0) return std::make_unique<FileEmbeddingProvider>(spec.substr(5));
  throw Error("unknown embedding provider '" + spec + "' (expected hash or file:<path>)");
}

std::unique_ptr<EmbeddingProvider> provider_from_provenance(const nlohmann::json& j) {
  const std::string kind = j.value("provider", std::string());
  if (kind == "hash") {
    HashEmbeddingOptions o;
    o.seed = j.at("seed").get<std::uint64_t>();
    o.layers = j.at("layers").get<std::size_t>();
    o.dim = j.at("dim").get<std::size_t>();
    o.piece_length = j.value("piece_length", o.piece_length);
    return std::make_unique<HashEmbeddingProvider>(o);
  }
  if (kind == "file") return std::make_unique<FileEmbeddingProvider>(j.at("path").get<std::string>());
  throw Error("unknown provider in provenance: '" + kind + "'");
}

}  // namespace jsee
