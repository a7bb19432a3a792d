#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsee/ontology.hpp"

namespace jsee {

inline constexpr const char* kSchemaVersion = "1.0";

struct Token {
  int index = 0;
  std::string text;
  int char_start = 0;  // half-open character offsets into the raw text
  int char_end = 0;

  bool operator==(const Token&) const = default;
};

// Half-open token interval [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int size() const { return end - start; }
  bool contains(const Span& o) const { return start <= o.start && o.end <= end; }
  bool overlaps(const Span& o) const { return start < o.end && o.start < end; }
  auto operator<=>(const Span&) const = default;
};

struct EntityMention {
  std::string id;
  std::string type;
  Span span;                 // full mention, or the effective span once a variant is chosen
  std::optional<Span> head;  // dropped by select_span_variant

  bool operator==(const EntityMention&) const = default;
};

struct RelationMention {
  std::string id;
  std::string type;
  std::string arg1;
  std::string arg2;

  bool operator==(const RelationMention&) const = default;
};

struct Argument {
  std::string entity;
  std::string role;

  auto operator<=>(const Argument&) const = default;
};

struct EventMention {
  std::string id;
  std::string type;
  Span trigger;
  std::vector<Argument> arguments;

  bool operator==(const EventMention&) const = default;
};

struct Sentence {
  std::string id;
  std::string doc_id;
  std::string lang;
  std::string text;
  std::vector<Token> tokens;
  std::vector<EntityMention> entities;
  std::vector<RelationMention> relations;
  std::vector<EventMention> events;

  const EntityMention* find_entity(const std::string& id) const;
  bool operator==(const Sentence&) const = default;
};

enum class SpanVariant { Head, Full };
enum class SplitTag { Train, Dev, Test };

std::string to_string(SpanVariant v);
SpanVariant parse_span_variant(const std::string& s);
std::string to_string(SplitTag t);

struct Corpus {
  std::string schema_version = kSchemaVersion;
  Ontology ontology;
  std::vector<Sentence> sentences;
  std::optional<SplitTag> split;
  std::optional<SpanVariant> variant;
};

// Checks a sentence against the ontology; throws SchemaError naming the
// sentence and the offending field.
void validate_sentence(const Sentence& s, const Ontology& o);
void validate_corpus(const Corpus& c);

// Sorts annotation lists into a canonical order: entities by (span, type, id),
// relations by (arg1, arg2, type, id), events by (trigger, type, id) with
// arguments sorted by (entity, role).
void canonicalize(Sentence& s);

nlohmann::ordered_json sentence_header_json(const Sentence& s);
Sentence sentence_header_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Sentence& s);
Sentence sentence_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const Corpus& c);
// `expected_version` empty accepts any version.
Corpus corpus_from_json(const nlohmann::json& j, const std::string& expected_version = kSchemaVersion);

Corpus load_corpus(const std::string& path, const std::string& schema_version = kSchemaVersion);
void save_corpus(const Corpus& c, const std::string& path);
std::string dump_canonical(const Corpus& c);

// Resolves every entity to its effective span under the chosen variant.
// Head falls back to the full mention when no head is annotated. Throws when
// the corpus was already resolved to the other variant.
Corpus select_span_variant(const Corpus& c, SpanVariant v);

// Default proportions: ACE05's train/dev/test shares.
inline constexpr std::array<double, 3> kDefaultSplitRatios = {0.90, 0.045, 0.055};

// Document-level random split; deterministic for a fixed seed.
std::array<Corpus, 3> split_corpus(const Corpus& c, std::array<double, 3> ratios,
                                   std::uint64_t seed);

struct CorpusStats {
  std::int64_t sentences = 0;
  std::int64_t events = 0;
  std::int64_t roles = 0;
  std::int64_t entities = 0;
  std::int64_t relations = 0;

  CorpusStats& operator+=(const CorpusStats& o);
  bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const Corpus& c);
nlohmann::ordered_json to_json(const CorpusStats& s);
std::string format_stats_table(const CorpusStats& s);

}  // namespace jsee
