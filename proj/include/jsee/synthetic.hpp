#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jsee/corpus.hpp"

namespace jsee {

// Assembles a sentence token by token; text and character offsets are
// derived on build(). Chinese tokens are joined without spaces.
class SentenceBuilder {
 public:
  SentenceBuilder(std::string id, std::string doc_id, std::string lang);

  // Appends tokens and returns the span they cover.
  Span words(const std::vector<std::string>& tokens);
  Span word(const std::string& token) { return words({token}); }

  std::string entity(const std::string& type, Span full, std::optional<Span> head = std::nullopt);
  std::string relation(const std::string& type, const std::string& arg1, const std::string& arg2);
  std::string event(const std::string& type, Span trigger, std::vector<Argument> arguments);

  Sentence build() const;

 private:
  Sentence s_;
};

// "I , purposely buy things made in Canada or USA ." with two events on
// "buy" and two on "made", which sits inside the "things ..." entity.
Sentence figure1_sentence();
// "School district officials have estimated the cost ..." with two
// co-anchored "cost" triggers and officials -orgaffiliation-> district.
Sentence figure2_sentence();
// Both sentences as a Rich ERE corpus.
Corpus figure_corpus();

struct SyntheticOptions {
  std::uint64_t seed = 7;
  std::size_t sentences = 50;
  std::vector<std::string> langs = {"en", "zh", "es"};
  std::size_t sentences_per_doc = 5;
};

// Templated Rich ERE sentences cycling through the languages. Templates
// cover double-tagged triggers, triggers nested in entities, nested
// entities, relations and head spans.
Corpus make_synthetic_corpus(const SyntheticOptions& options);

}  // namespace jsee
