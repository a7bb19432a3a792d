#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "jsee/corpus.hpp"

namespace jsee {

enum class Metric { Entity, Relation, TrgI, TrgC, ArgI, ArgC };
inline constexpr std::size_t kMetricCount = 6;
std::string to_string(Metric m);

struct MetricCounts {
  std::int64_t gold = 0;
  std::int64_t predicted = 0;
  std::int64_t matched = 0;

  // Precision with zero predictions is 0.
  double precision() const;
  double recall() const;
  double f1() const;

  MetricCounts& operator+=(const MetricCounts& o);
  bool operator==(const MetricCounts&) const = default;
};

struct ScoreReport {
  std::array<MetricCounts, kMetricCount> counts{};
  // False for event-only models: Entity and Relation are reported as n/a.
  bool entity_relation_applicable = true;

  MetricCounts& operator[](Metric m) { return counts[static_cast<std::size_t>(m)]; }
  const MetricCounts& operator[](Metric m) const { return counts[static_cast<std::size_t>(m)]; }
  ScoreReport& operator+=(const ScoreReport& o);
};

// Match counts for one sentence. Matching is one-to-one on exact keys:
// Entity (span, type); Relation (arg1 span, arg2 span, type); Trg-I span;
// Trg-C (span, type); Arg-I (event type, span); Arg-C (event type, span, role).
ScoreReport score_sentence(const Sentence& pred, const Sentence& gold);

// Micro-averaged over sentences aligned by id. Throws Error when the two
// id sets differ.
ScoreReport score(std::span<const Sentence> pred, std::span<const Sentence> gold,
                  bool entity_relation_applicable = true);

struct PartitionedScores {
  ScoreReport nested;
  ScoreReport non_nested;
};

// Splits by the nested-sentence predicate evaluated on gold.
PartitionedScores score_partitioned(std::span<const Sentence> pred, std::span<const Sentence> gold,
                                    bool entity_relation_applicable = true);

nlohmann::ordered_json to_json(const ScoreReport& r);
// Columns ordered Trg-I, Trg-C, Arg-I, Arg-C, Entity, Relation.
std::string format_score_table(const ScoreReport& r, const std::string& title = "");

}  // namespace jsee
