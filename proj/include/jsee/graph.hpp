#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jsee/corpus.hpp"

namespace jsee {

enum class NodeKind { Root, Trigger, Entity };

std::string to_string(NodeKind k);
NodeKind parse_node_kind(const std::string& s);

inline constexpr const char* kTriggerLabel = "trigger";
// Entity label used once entity types are stripped by reduce_graph.
inline constexpr const char* kGenericEntityLabel = "entity";

struct GraphNode {
  int id = 0;
  NodeKind kind = NodeKind::Root;
  std::string label;        // "trigger", an entity type, or empty for the root
  std::vector<int> anchor;  // sorted, unique token indices; empty for the root
  std::string ref;          // source annotation id, empty for predicted nodes

  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  int src = 0;
  int dst = 0;
  std::string label;
  std::string ref;  // relation id for entity-entity edges

  bool operator==(const GraphEdge&) const = default;
};

// Anchored information graph of one sentence. Node 0 is always the root.
struct IEGraph {
  std::string sentence_id;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;
  bool reduced = false;  // entity types and relations stripped

  bool operator==(const IEGraph&) const = default;
};

struct Violation {
  std::string rule;
  std::vector<int> nodes;
  std::vector<int> edges;  // indices into IEGraph::edges
  std::string message;
};

struct Annotations {
  std::vector<EntityMention> entities;
  std::vector<RelationMention> relations;
  std::vector<EventMention> events;
};

// One node per entity mention and per event mention, root first, then nodes
// ordered by (min anchor, max anchor, kind, label, event type, ref).
IEGraph encode(const Sentence& s);

// `token_count` < 0 skips the anchor range check.
std::vector<Violation> validate(const IEGraph& g, const Ontology& o, int token_count = -1);

// Inverse of encode. Throws Error listing violations when the graph is
// invalid. Output lists are canonicalized.
Annotations decode(const IEGraph& g, const Ontology& o, int token_count);

// Drops relation edges, replaces entity types with the generic label and
// removes entities that fill no argument slot.
IEGraph reduce_graph(const IEGraph& g);

Span anchor_span(const std::vector<int>& anchor);

nlohmann::ordered_json to_json(const IEGraph& g);
IEGraph graph_from_json(const nlohmann::json& j);

// Graph file: the corpus header plus one {sentence, graph} record per sentence.
struct GraphCorpus {
  std::string schema_version = kSchemaVersion;
  Ontology ontology;
  std::optional<SpanVariant> variant;
  std::vector<Sentence> sentences;  // token-level headers only
  std::vector<IEGraph> graphs;
};

// Throws SchemaError if an entity still carries a head span.
GraphCorpus encode_corpus(const Corpus& c);
// Throws Error naming the sentence ids of invalid graphs.
Corpus decode_corpus(const GraphCorpus& gc);
nlohmann::ordered_json to_json(const GraphCorpus& gc);
GraphCorpus graph_corpus_from_json(const nlohmann::json& j);

}  // namespace jsee
