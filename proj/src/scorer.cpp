#include "jsee/scorer.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "jsee/common.hpp"
#include "jsee/nesting.hpp"

namespace jsee {

std::string to_string(Metric m) {
  switch (m) {
    case Metric::Entity: return "Entity";
    case Metric::Relation: return "Relation";
    case Metric::TrgI: return "Trg-I";
    case Metric::TrgC: return "Trg-C";
    case Metric::ArgI: return "Arg-I";
    case Metric::ArgC: return "Arg-C";
  }
  return "";
}

double MetricCounts::precision() const {
  return predicted > 0 ? static_cast<double>(matched) / static_cast<double>(predicted) : 0.0;
}

double MetricCounts::recall() const {
  return gold > 0 ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
}

double MetricCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

MetricCounts& MetricCounts::operator+=(const MetricCounts& o) {
  gold += o.gold;
  predicted += o.predicted;
  matched += o.matched;
  return *this;
}

ScoreReport& ScoreReport::operator+=(const ScoreReport& o) {
  for (std::size_t i = 0; i < kMetricCount; ++i) counts[i] += o.counts[i];
  return *this;
}

namespace {

using Key = std::tuple<int, int, int, int, std::string, std::string>;

// Greedy one-to-one matching over keys sorted by span then label. Exact-key
// matching makes the count independent of the order.
MetricCounts match(std::vector<Key> pred, std::vector<Key> gold) {
  std::sort(pred.begin(), pred.end());
  std::sort(gold.begin(), gold.end());
  MetricCounts c;
  c.predicted = static_cast<std::int64_t>(pred.size());
  c.gold = static_cast<std::int64_t>(gold.size());
  std::size_t i = 0, j = 0;
  while (i < pred.size() && j < gold.size()) {
    if (pred[i] == gold[j]) {
      ++c.matched;
      ++i;
      ++j;
    } else if (pred[i] < gold[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return c;
}

struct Keys {
  std::vector<Key> entity, relation, trg_i, trg_c, arg_i, arg_c;
};

Keys keys_of(const Sentence& s) {
  Keys k;
  std::unordered_map<std::string, Span> span_of;
  for (const auto& e : s.entities) {
    span_of[e.id] = e.span;
    k.entity.emplace_back(e.span.start, e.span.end, 0, 0, e.type, "");
  }
  for (const auto& r : s.relations) {
    auto a = span_of.find(r.arg1);
    auto b = span_of.find(r.arg2);
    if (a == span_of.end() || b == span_of.end()) continue;
    k.relation.emplace_back(a->second.start, a->second.end, b->second.start, b->second.end,
                            r.type, "");
  }
  for (const auto& ev : s.events) {
    k.trg_i.emplace_back(ev.trigger.start, ev.trigger.end, 0, 0, "", "");
    k.trg_c.emplace_back(ev.trigger.start, ev.trigger.end, 0, 0, ev.type, "");
    for (const auto& a : ev.arguments) {
      auto it = span_of.find(a.entity);
      if (it == span_of.end()) continue;
      k.arg_i.emplace_back(it->second.start, it->second.end, 0, 0, ev.type, "");
      k.arg_c.emplace_back(it->second.start, it->second.end, 0, 0, ev.type, a.role);
    }
  }
  return k;
}

}  // namespace

ScoreReport score_sentence(const Sentence& pred, const Sentence& gold) {
  Keys p = keys_of(pred);
  Keys g = keys_of(gold);
  ScoreReport r;
  r[Metric::Entity] = match(std::move(p.entity), std::move(g.entity));
  r[Metric::Relation] = match(std::move(p.relation), std::move(g.relation));
  r[Metric::TrgI] = match(std::move(p.trg_i), std::move(g.trg_i));
  r[Metric::TrgC] = match(std::move(p.trg_c), std::move(g.trg_c));
  r[Metric::ArgI] = match(std::move(p.arg_i), std::move(g.arg_i));
  r[Metric::ArgC] = match(std::move(p.arg_c), std::move(g.arg_c));
  return r;
}

namespace {

std::vector<std::pair<const Sentence*, const Sentence*>> align(std::span<const Sentence> pred,
                                                               std::span<const Sentence> gold) {
  std::unordered_map<std::string, const Sentence*> by_id;
  for (const auto& s : pred) {
    if (!by_id.emplace(s.id, &s).second) throw Error("duplicate predicted sentence id '" + s.id + "'");
  }
  if (pred.size() != gold.size()) {
    throw Error("sentence id mismatch: " + std::to_string(pred.size()) + " predicted vs " +
                std::to_string(gold.size()) + " gold sentences");
  }
  std::vector<std::pair<const Sentence*, const Sentence*>> out;
  for (const auto& g : gold) {
    auto it = by_id.find(g.id);
    if (it == by_id.end()) throw Error("sentence id mismatch: no prediction for '" + g.id + "'");
    out.emplace_back(it->second, &g);
  }
  return out;
}

}  // namespace

ScoreReport score(std::span<const Sentence> pred, std::span<const Sentence> gold,
                  bool entity_relation_applicable) {
  auto pairs = align(pred, gold);
  std::vector<ScoreReport> per(pairs.size());
  const std::int64_t n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) per[i] = score_sentence(*pairs[i].first, *pairs[i].second);
  ScoreReport total;
  for (const auto& r : per) total += r;
  total.entity_relation_applicable = entity_relation_applicable;
  return total;
}

PartitionedScores score_partitioned(std::span<const Sentence> pred, std::span<const Sentence> gold,
                                    bool entity_relation_applicable) {
  auto pairs = align(pred, gold);
  PartitionedScores out;
  for (const auto& [p, g] : pairs) {
    (is_nested(*g) ? out.nested : out.non_nested) += score_sentence(*p, *g);
  }
  out.nested.entity_relation_applicable = entity_relation_applicable;
  out.non_nested.entity_relation_applicable = entity_relation_applicable;
  return out;
}

nlohmann::ordered_json to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    const Metric m = static_cast<Metric>(i);
    const bool na = !r.entity_relation_applicable && (m == Metric::Entity || m == Metric::Relation);
    if (na) {
      j[to_string(m)] = nullptr;
      continue;
    }
    const MetricCounts& c = r[m];
    j[to_string(m)] = {{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                       {"gold", c.gold},           {"predicted", c.predicted},
                       {"matched", c.matched}};
  }
  return j;
}

std::string format_score_table(const ScoreReport& r, const std::string& title) {
  const Metric order[] = {Metric::TrgI, Metric::TrgC,   Metric::ArgI,
                          Metric::ArgC, Metric::Entity, Metric::Relation};
  std::ostringstream out;
  if (!title.empty()) out << title << "\n";
  out << std::left << std::setw(6) << "";
  for (Metric m : order) out << std::right << std::setw(10) << to_string(m);
  out << "\n";
  for (int row = 0; row < 3; ++row) {
    out << std::left << std::setw(6) << (row == 0 ? "P" : row == 1 ? "R" : "F1");
    for (Metric m : order) {
      const bool na =
          !r.entity_relation_applicable && (m == Metric::Entity || m == Metric::Relation);
      out << std::right << std::setw(10);
      if (na) {
        out << "-";
      } else {
        const MetricCounts& c = r[m];
        const double v = row == 0 ? c.precision() : row == 1 ? c.recall() : c.f1();
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(1) << 100.0 * v;
        out << cell.str();
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace jsee
