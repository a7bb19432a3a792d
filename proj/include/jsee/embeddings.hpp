#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsee/corpus.hpp"
#include "jsee/neural.hpp"

namespace jsee {

// Source of per-sentence subword embeddings. Implementations are immutable
// after construction and safe to share across threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Throws Error when the provider cannot cover `s` or its alignment does
  // not match the sentence tokens.
  virtual EmbeddingBundle embed(const Sentence& s) const = 0;
  virtual std::size_t layers() const = 0;
  virtual std::size_t dim() const = 0;
  // Recorded in checkpoints so predictions can rebuild the same provider.
  virtual nlohmann::ordered_json provenance() const = 0;
};

struct HashEmbeddingOptions {
  std::uint64_t seed = 13;
  std::size_t layers = 3;
  std::size_t dim = 32;
  std::size_t piece_length = 4;  // code points per subword piece
};

// Deterministic embeddings keyed on token text: each token is cut into
// fixed-length pieces and every piece maps to seeded pseudo-random vectors.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(HashEmbeddingOptions options = {});
  EmbeddingBundle embed(const Sentence& s) const override;
  std::size_t layers() const override { return options_.layers; }
  std::size_t dim() const override { return options_.dim; }
  nlohmann::ordered_json provenance() const override;

  static std::vector<std::string> split_pieces(const std::string& token, std::size_t piece_length);

 private:
  HashEmbeddingOptions options_;
};

// JSON-lines file: {sentence_id, layers, dim, alignment, vectors}.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(std::string path);
  EmbeddingBundle embed(const Sentence& s) const override;
  std::size_t layers() const override { return layers_; }
  std::size_t dim() const override { return dim_; }
  nlohmann::ordered_json provenance() const override;

 private:
  std::string path_;
  std::size_t layers_ = 0;
  std::size_t dim_ = 0;
  std::map<std::string, EmbeddingBundle> bundles_;
};

nlohmann::ordered_json to_json(const EmbeddingBundle& b);
EmbeddingBundle bundle_from_json(const nlohmann::json& j);
void write_embeddings_file(const std::string& path, const std::vector<EmbeddingBundle>& bundles);

// "hash" or "file:<path>".
std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec,
                                                 const HashEmbeddingOptions& hash_options = {});
std::unique_ptr<EmbeddingProvider> provider_from_provenance(const nlohmann::json& j);

}  // namespace jsee
