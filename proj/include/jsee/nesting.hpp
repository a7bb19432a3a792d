#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "jsee/corpus.hpp"

namespace jsee {

// Nested-pair counts per category. The *_mentions counters are the
// alternate convention: mentions taking part in at least one nested pair.
struct NestingReport {
  std::int64_t trg_trg = 0;
  std::int64_t ent_ent = 0;
  std::int64_t trg_ent = 0;
  std::int64_t trg_trg_mentions = 0;
  std::int64_t ent_ent_mentions = 0;
  std::int64_t trg_ent_mentions = 0;
  std::int64_t nested_sents = 0;
  std::int64_t all_sents = 0;

  NestingReport& operator+=(const NestingReport& o);
  bool operator==(const NestingReport&) const = default;
};

// Full or partial token overlap. Identical spans count as nested because
// they are only ever compared for distinct annotations.
bool spans_nested(const Span& a, const Span& b);

NestingReport count_nesting(const Sentence& s);
NestingReport count_nesting(const Corpus& c);
bool is_nested(const Sentence& s);

// Sentence-level partition: (nested, non_nested).
std::pair<Corpus, Corpus> partition_nested(const Corpus& c);

nlohmann::ordered_json to_json(const NestingReport& r);
std::string format_nesting_table(const NestingReport& r);

}  // namespace jsee
