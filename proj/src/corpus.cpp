#include "jsee/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "jsee/common.hpp"

namespace jsee {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

int utf8_length(const std::string& s) {
  int n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

const json& require(const json& j, const char* key, const std::string& sid,
                    const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw SchemaError(sid, path + key, "missing field");
  }
  return j.at(key);
}

std::string require_string(const json& j, const char* key, const std::string& sid,
                           const std::string& path) {
  const json& v = require(j, key, sid, path);
  if (!v.is_string()) throw SchemaError(sid, path + key, "expected a string");
  return v.get<std::string>();
}

int require_int(const json& j, const char* key, const std::string& sid, const std::string& path) {
  const json& v = require(j, key, sid, path);
  if (!v.is_number_integer()) throw SchemaError(sid, path + key, "expected an integer");
  return v.get<int>();
}

const json& require_array(const json& j, const char* key, const std::string& sid,
                          const std::string& path) {
  const json& v = require(j, key, sid, path);
  if (!v.is_array()) throw SchemaError(sid, path + key, "expected an array");
  return v;
}

void check_span(const Span& s, int n_tokens, const std::string& sid, const std::string& field) {
  if (!(0 <= s.start && s.start < s.end && s.end <= n_tokens)) {
    std::ostringstream msg;
    msg << "span [" << s.start << "," << s.end << ") outside [0," << n_tokens << ")";
    throw SchemaError(sid, field, msg.str());
  }
}

}  // namespace

const EntityMention* Sentence::find_entity(const std::string& eid) const {
  for (const auto& e : entities) {
    if (e.id == eid) return &e;
  }
  return nullptr;
}

std::string to_string(SpanVariant v) { return v == SpanVariant::Head ? "head" : "full"; }

SpanVariant parse_span_variant(const std::string& s) {
  if (s == "head") return SpanVariant::Head;
  if (s == "full") return SpanVariant::Full;
  throw Error("unknown span variant '" + s + "' (expected head or full)");
}

std::string to_string(SplitTag t) {
  switch (t) {
    case SplitTag::Train: return "train";
    case SplitTag::Dev: return "dev";
    case SplitTag::Test: return "test";
  }
  return "train";
}

namespace {
std::optional<SplitTag> parse_split(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "dev") return SplitTag::Dev;
  if (s == "test") return SplitTag::Test;
  throw SchemaError("", "split", "unknown split tag '" + s + "'");
}
}  // namespace

void validate_sentence(const Sentence& s, const Ontology& o) {
  const std::string& sid = s.id;
  if (s.id.empty()) throw SchemaError(sid, "id", "empty sentence id");
  if (s.lang != "en" && s.lang != "zh" && s.lang != "es") {
    throw SchemaError(sid, "lang", "unsupported language '" + s.lang + "'");
  }
  const int text_len = utf8_length(s.text);
  int prev_end = 0;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const Token& t = s.tokens[i];
    const std::string field = "tokens[" + std::to_string(i) + "]";
    if (t.index != static_cast<int>(i)) throw SchemaError(sid, field, "token index out of order");
    if (!(t.char_start < t.char_end)) throw SchemaError(sid, field, "empty character range");
    if (t.char_start < prev_end) throw SchemaError(sid, field, "tokens overlap or are unordered");
    if (t.char_end > text_len) throw SchemaError(sid, field, "character offset beyond text");
    prev_end = t.char_end;
  }
  const int n = static_cast<int>(s.tokens.size());

  std::set<std::string> entity_ids;
  for (const auto& e : s.entities) {
    const std::string field = "entities." + e.id;
    if (e.id.empty()) throw SchemaError(sid, "entities", "empty entity id");
    if (!entity_ids.insert(e.id).second) throw SchemaError(sid, field, "duplicate entity id");
    if (!o.has_entity_type(e.type)) {
      throw SchemaError(sid, field + ".type", "unknown entity type '" + e.type + "'");
    }
    check_span(e.span, n, sid, field);
    if (e.head) {
      check_span(*e.head, n, sid, field + ".head");
      if (!e.span.contains(*e.head)) {
        throw SchemaError(sid, field + ".head", "head not contained in the full mention");
      }
    }
  }

  std::set<std::string> relation_ids;
  std::set<std::pair<std::string, std::string>> relation_pairs;
  for (const auto& r : s.relations) {
    const std::string field = "relations." + r.id;
    if (r.id.empty()) throw SchemaError(sid, "relations", "empty relation id");
    if (!relation_ids.insert(r.id).second) throw SchemaError(sid, field, "duplicate relation id");
    if (!o.has_relation_type(r.type)) {
      throw SchemaError(sid, field + ".type", "unknown relation type '" + r.type + "'");
    }
    if (!entity_ids.count(r.arg1)) {
      throw SchemaError(sid, field + ".arg1", "dangling entity id '" + r.arg1 + "'");
    }
    if (!entity_ids.count(r.arg2)) {
      throw SchemaError(sid, field + ".arg2", "dangling entity id '" + r.arg2 + "'");
    }
    if (r.arg1 == r.arg2) throw SchemaError(sid, field, "relation arguments must differ");
    if (!relation_pairs.emplace(r.arg1, r.arg2).second) {
      throw SchemaError(sid, field, "duplicate relation over the same ordered entity pair");
    }
  }

  std::set<std::string> event_ids;
  for (const auto& ev : s.events) {
    const std::string field = "events." + ev.id;
    if (ev.id.empty()) throw SchemaError(sid, "events", "empty event id");
    if (!event_ids.insert(ev.id).second) throw SchemaError(sid, field, "duplicate event id");
    if (!o.has_event_type(ev.type)) {
      throw SchemaError(sid, field + ".type", "unknown event type '" + ev.type + "'");
    }
    check_span(ev.trigger, n, sid, field + ".trigger");
    std::set<std::string> seen;
    for (const auto& a : ev.arguments) {
      if (!entity_ids.count(a.entity)) {
        throw SchemaError(sid, field + ".args", "dangling entity id '" + a.entity + "'");
      }
      if (!o.has_role(a.role)) {
        throw SchemaError(sid, field + ".args", "unknown argument role '" + a.role + "'");
      }
      if (!seen.insert(a.entity).second) {
        throw SchemaError(sid, field + ".args",
                          "entity '" + a.entity + "' fills more than one role");
      }
    }
  }
}

void validate_corpus(const Corpus& c) {
  c.ontology.validate();
  std::set<std::string> ids;
  for (const auto& s : c.sentences) {
    if (!ids.insert(s.id).second) throw SchemaError(s.id, "id", "duplicate sentence id");
    validate_sentence(s, c.ontology);
    if (c.variant) {
      for (const auto& e : s.entities) {
        if (e.head) {
          throw SchemaError(s.id, "entities." + e.id + ".head",
                            "resolved corpus must not carry head spans");
        }
      }
    }
  }
}

void canonicalize(Sentence& s) {
  std::sort(s.entities.begin(), s.entities.end(), [](const auto& a, const auto& b) {
    return std::tie(a.span, a.type, a.id) < std::tie(b.span, b.type, b.id);
  });
  std::sort(s.relations.begin(), s.relations.end(), [](const auto& a, const auto& b) {
    return std::tie(a.arg1, a.arg2, a.type, a.id) < std::tie(b.arg1, b.arg2, b.type, b.id);
  });
  for (auto& ev : s.events) std::sort(ev.arguments.begin(), ev.arguments.end());
  std::sort(s.events.begin(), s.events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.trigger, a.type, a.id) < std::tie(b.trigger, b.type, b.id);
  });
}

ordered_json sentence_header_json(const Sentence& s) {
  ordered_json j;
  j["id"] = s.id;
  j["doc_id"] = s.doc_id;
  j["lang"] = s.lang;
  j["text"] = s.text;
  ordered_json toks = ordered_json::array();
  for (const auto& t : s.tokens) {
    toks.push_back({{"text", t.text}, {"start_char", t.char_start}, {"end_char", t.char_end}});
  }
  j["tokens"] = std::move(toks);
  return j;
}

Sentence sentence_header_from_json(const json& j) {
  Sentence s;
  if (!j.is_object()) throw SchemaError("", "sentences[]", "expected an object");
  s.id = require_string(j, "id", "", "");
  const std::string& sid = s.id;
  s.doc_id = require_string(j, "doc_id", sid, "");
  s.lang = require_string(j, "lang", sid, "");
  s.text = require_string(j, "text", sid, "");
  const json& toks = require_array(j, "tokens", sid, "");
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string path = "tokens[" + std::to_string(i) + "].";
    Token t;
    t.index = static_cast<int>(i);
    t.text = require_string(toks[i], "text", sid, path);
    t.char_start = require_int(toks[i], "start_char", sid, path);
    t.char_end = require_int(toks[i], "end_char", sid, path);
    s.tokens.push_back(std::move(t));
  }
  return s;
}

ordered_json to_json(const Sentence& s) {
  ordered_json j = sentence_header_json(s);
  ordered_json ents = ordered_json::array();
  for (const auto& e : s.entities) {
    ordered_json je;
    je["id"] = e.id;
    je["type"] = e.type;
    je["start"] = e.span.start;
    je["end"] = e.span.end;
    if (e.head) {
      je["head_start"] = e.head->start;
      je["head_end"] = e.head->end;
    }
    ents.push_back(std::move(je));
  }
  j["entities"] = std::move(ents);
  ordered_json rels = ordered_json::array();
  for (const auto& r : s.relations) {
    rels.push_back({{"id", r.id}, {"type", r.type}, {"arg1", r.arg1}, {"arg2", r.arg2}});
  }
  j["relations"] = std::move(rels);
  ordered_json evs = ordered_json::array();
  for (const auto& ev : s.events) {
    ordered_json args = ordered_json::array();
    for (const auto& a : ev.arguments) args.push_back({{"entity", a.entity}, {"role", a.role}});
    evs.push_back({{"id", ev.id},
                   {"type", ev.type},
                   {"trigger_start", ev.trigger.start},
                   {"trigger_end", ev.trigger.end},
                   {"args", std::move(args)}});
  }
  j["events"] = std::move(evs);
  return j;
}

Sentence sentence_from_json(const json& j) {
  Sentence s = sentence_header_from_json(j);
  const std::string& sid = s.id;
  // Annotation lists may be omitted (e.g. unannotated input for prediction).
  if (j.contains("entities")) {
    const json& ents = require_array(j, "entities", sid, "");
    for (std::size_t i = 0; i < ents.size(); ++i) {
      const std::string path = "entities[" + std::to_string(i) + "].";
      EntityMention e;
      e.id = require_string(ents[i], "id", sid, path);
      e.type = require_string(ents[i], "type", sid, path);
      e.span = {require_int(ents[i], "start", sid, path), require_int(ents[i], "end", sid, path)};
      const bool hs = ents[i].contains("head_start");
      const bool he = ents[i].contains("head_end");
      if (hs != he) throw SchemaError(sid, path + "head_start", "head_start/head_end must co-occur");
      if (hs) {
        e.head = Span{require_int(ents[i], "head_start", sid, path),
                      require_int(ents[i], "head_end", sid, path)};
      }
      s.entities.push_back(std::move(e));
    }
  }
  if (j.contains("relations")) {
    const json& rels = require_array(j, "relations", sid, "");
    for (std::size_t i = 0; i < rels.size(); ++i) {
      const std::string path = "relations[" + std::to_string(i) + "].";
      RelationMention r;
      r.id = require_string(rels[i], "id", sid, path);
      r.type = require_string(rels[i], "type", sid, path);
      r.arg1 = require_string(rels[i], "arg1", sid, path);
      r.arg2 = require_string(rels[i], "arg2", sid, path);
      s.relations.push_back(std::move(r));
    }
  }
  if (j.contains("events")) {
    const json& evs = require_array(j, "events", sid, "");
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const std::string path = "events[" + std::to_string(i) + "].";
      EventMention ev;
      ev.id = require_string(evs[i], "id", sid, path);
      ev.type = require_string(evs[i], "type", sid, path);
      ev.trigger = {require_int(evs[i], "trigger_start", sid, path),
                    require_int(evs[i], "trigger_end", sid, path)};
      if (evs[i].contains("args")) {
        const json& args = require_array(evs[i], "args", sid, path);
        for (std::size_t k = 0; k < args.size(); ++k) {
          const std::string apath = path + "args[" + std::to_string(k) + "].";
          ev.arguments.push_back({require_string(args[k], "entity", sid, apath),
                                  require_string(args[k], "role", sid, apath)});
        }
      }
      s.events.push_back(std::move(ev));
    }
  }
  return s;
}

ordered_json to_json(const Corpus& c) {
  ordered_json j;
  j["schema_version"] = c.schema_version;
  if (c.split) j["split"] = to_string(*c.split);
  if (c.variant) j["span_variant"] = to_string(*c.variant);
  j["ontology"] = to_json(c.ontology);
  ordered_json sents = ordered_json::array();
  for (const auto& s : c.sentences) sents.push_back(to_json(s));
  j["sentences"] = std::move(sents);
  return j;
}

Corpus corpus_from_json(const json& j, const std::string& expected_version) {
  if (!j.is_object()) throw SchemaError("", "", "corpus must be a JSON object");
  Corpus c;
  c.schema_version = require_string(j, "schema_version", "", "");
  if (!expected_version.empty() && c.schema_version != expected_version) {
    throw SchemaError("", "schema_version",
                      "expected '" + expected_version + "', found '" + c.schema_version + "'");
  }
  c.ontology = ontology_from_json(require(j, "ontology", "", ""));
  if (j.contains("split")) c.split = parse_split(require_string(j, "split", "", ""));
  if (j.contains("span_variant")) {
    try {
      c.variant = parse_span_variant(require_string(j, "span_variant", "", ""));
    } catch (const SchemaError&) {
      throw;
    } catch (const Error& e) {
      throw SchemaError("", "span_variant", e.what());
    }
  }
  for (const auto& sj : require_array(j, "sentences", "", "")) {
    c.sentences.push_back(sentence_from_json(sj));
  }
  validate_corpus(c);
  return c;
}

Corpus load_corpus(const std::string& path, const std::string& schema_version) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SchemaError("", "", "invalid JSON in '" + path + "': " + e.what());
  }
  return corpus_from_json(j, schema_version);
}

std::string dump_canonical(const Corpus& c) { return to_json(c).dump(1) + "\n"; }

void save_corpus(const Corpus& c, const std::string& path) {
  write_file_atomic(path, dump_canonical(c));
}

Corpus select_span_variant(const Corpus& c, SpanVariant v) {
  if (c.variant && *c.variant != v) {
    throw Error("corpus already resolved to the '" + to_string(*c.variant) +
                "' span variant; head spans are no longer available");
  }
  Corpus out = c;
  out.variant = v;
  for (auto& s : out.sentences) {
    for (auto& e : s.entities) {
      if (v == SpanVariant::Head && e.head) e.span = *e.head;
      e.head.reset();
    }
    canonicalize(s);
  }
  return out;
}

std::array<Corpus, 3> split_corpus(const Corpus& c, std::array<double, 3> ratios,
                                   std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0 || !std::isfinite(r)) throw Error("split ratios must be finite and non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("split ratios must sum to 1");

  std::vector<std::string> docs;
  std::unordered_map<std::string, std::size_t> doc_index;
  for (const auto& s : c.sentences) {
    if (doc_index.emplace(s.doc_id, docs.size()).second) docs.push_back(s.doc_id);
  }
  if (docs.size() < ratios.size()) {
    throw Error("cannot split " + std::to_string(docs.size()) + " documents into 3 parts");
  }

  // Fisher-Yates with an explicit engine keeps the assignment stable across
  // standard library implementations.
  std::mt19937_64 rng(seed);
  for (std::size_t i = docs.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(docs[i - 1], docs[j]);
  }

  // Largest-remainder apportionment of document counts.
  const double n = static_cast<double>(docs.size());
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    double exact = ratios[k] * n;
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  while (assigned < docs.size()) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if (remainder[k] > remainder[best] + 1e-12) best = k;
    }
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }

  std::unordered_map<std::string, int> part_of;
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    for (std::size_t m = 0; m < counts[k]; ++m) part_of[docs[pos++]] = k;
  }

  std::array<Corpus, 3> out;
  const std::array<SplitTag, 3> tags = {SplitTag::Train, SplitTag::Dev, SplitTag::Test};
  for (int k = 0; k < 3; ++k) {
    out[k].schema_version = c.schema_version;
    out[k].ontology = c.ontology;
    out[k].variant = c.variant;
    out[k].split = tags[k];
  }
  for (const auto& s : c.sentences) out[part_of.at(s.doc_id)].sentences.push_back(s);
  return out;
}

CorpusStats& CorpusStats::operator+=(const CorpusStats& o) {
  sentences += o.sentences;
  events += o.events;
  roles += o.roles;
  entities += o.entities;
  relations += o.relations;
  return *this;
}

CorpusStats corpus_stats(const Corpus& c) {
  CorpusStats st;
  for (const auto& s : c.sentences) {
    ++st.sentences;
    st.events += static_cast<std::int64_t>(s.events.size());
    for (const auto& ev : s.events) st.roles += static_cast<std::int64_t>(ev.arguments.size());
    st.entities += static_cast<std::int64_t>(s.entities.size());
    st.relations += static_cast<std::int64_t>(s.relations.size());
  }
  return st;
}

ordered_json to_json(const CorpusStats& s) {
  return {{"sents", s.sentences},
          {"events", s.events},
          {"roles", s.roles},
          {"entities", s.entities},
          {"relations", s.relations}};
}

std::string format_stats_table(const CorpusStats& s) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "#Sents" << std::setw(10) << "#Events" << std::setw(10)
      << "#Roles" << std::setw(11) << "#Entities" << "#Relations\n";
  out << std::setw(10) << s.sentences << std::setw(10) << s.events << std::setw(10) << s.roles
      << std::setw(11) << s.entities << s.relations << "\n";
  return out.str();
}

}  // namespace jsee
