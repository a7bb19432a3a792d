#include "jsee/graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "jsee/common.hpp"

namespace jsee {

using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Root: return "root";
    case NodeKind::Trigger: return "trigger";
    case NodeKind::Entity: return "entity";
  }
  return "root";
}

NodeKind parse_node_kind(const std::string& s) {
  if (s == "root") return NodeKind::Root;
  if (s == "trigger") return NodeKind::Trigger;
  if (s == "entity") return NodeKind::Entity;
  throw SchemaError("", "nodes[].kind", "unknown node kind '" + s + "'");
}

Span anchor_span(const std::vector<int>& anchor) {
  if (anchor.empty()) return {};
  auto [lo, hi] = std::minmax_element(anchor.begin(), anchor.end());
  return {*lo, *hi + 1};
}

namespace {

std::vector<int> span_tokens(const Span& s) {
  std::vector<int> out;
  for (int t = s.start; t < s.end; ++t) out.push_back(t);
  return out;
}

struct PendingNode {
  GraphNode node;
  std::string event_type;
};

}  // namespace

IEGraph encode(const Sentence& s) {
  std::vector<PendingNode> pending;
  for (const auto& e : s.entities) {
    pending.push_back({{0, NodeKind::Entity, e.type, span_tokens(e.span), e.id}, ""});
  }
  for (const auto& ev : s.events) {
    pending.push_back({{0, NodeKind::Trigger, kTriggerLabel, span_tokens(ev.trigger), ev.id},
                       ev.type});
  }
  std::stable_sort(pending.begin(), pending.end(), [](const PendingNode& a, const PendingNode& b) {
    const int ak = static_cast<int>(a.node.kind);
    const int bk = static_cast<int>(b.node.kind);
    return std::tie(a.node.anchor.front(), a.node.anchor.back(), ak, a.node.label, a.event_type,
                    a.node.ref) < std::tie(b.node.anchor.front(), b.node.anchor.back(), bk,
                                           b.node.label, b.event_type, b.node.ref);
  });

  IEGraph g;
  g.sentence_id = s.id;
  g.nodes.push_back({0, NodeKind::Root, "", {}, ""});
  std::map<std::string, int> entity_node;
  std::map<std::string, int> event_node;
  for (auto& p : pending) {
    p.node.id = static_cast<int>(g.nodes.size());
    if (p.node.kind == NodeKind::Entity) {
      entity_node[p.node.ref] = p.node.id;
    } else {
      event_node[p.node.ref] = p.node.id;
    }
    g.nodes.push_back(p.node);
  }

  for (const auto& ev : s.events) {
    const int trig = event_node.at(ev.id);
    g.edges.push_back({0, trig, ev.type, ""});
    for (const auto& a : ev.arguments) {
      auto it = entity_node.find(a.entity);
      if (it == entity_node.end()) {
        throw Error("internal: argument '" + a.entity + "' of event '" + ev.id +
                    "' has no entity node");
      }
      g.edges.push_back({trig, it->second, a.role, ""});
    }
  }
  for (const auto& r : s.relations) {
    auto a1 = entity_node.find(r.arg1);
    auto a2 = entity_node.find(r.arg2);
    if (a1 == entity_node.end() || a2 == entity_node.end()) {
      throw Error("internal: relation '" + r.id + "' references an entity with no node");
    }
    g.edges.push_back({a1->second, a2->second, r.type, r.id});
  }
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& a, const GraphEdge& b) {
    return std::tie(a.src, a.dst, a.label) < std::tie(b.src, b.dst, b.label);
  });
  return g;
}

std::vector<Violation> validate(const IEGraph& g, const Ontology& o, int token_count) {
  std::vector<Violation> out;
  auto add = [&](std::string rule, std::vector<int> nodes, std::vector<int> edges,
                 std::string msg) {
    out.push_back({std::move(rule), std::move(nodes), std::move(edges), std::move(msg)});
  };

  if (g.nodes.empty()) {
    add("root", {}, {}, "graph has no root node");
    return out;
  }
  const int n = static_cast<int>(g.nodes.size());
  if (g.nodes[0].kind != NodeKind::Root) add("root", {0}, {}, "node 0 is not the root");

  for (int i = 0; i < n; ++i) {
    const GraphNode& node = g.nodes[i];
    if (node.id != i) add("node-id", {i}, {}, "node ids must be dense and ordered");
    if (node.kind == NodeKind::Root) {
      if (i != 0) add("root", {i}, {}, "root must hold the first position and be unique");
      if (!node.anchor.empty()) add("anchor", {i}, {}, "root must not be anchored");
      if (!node.label.empty()) add("label", {i}, {}, "root must not carry a label");
      continue;
    }
    if (node.anchor.empty()) {
      add("anchor", {i}, {}, "trigger and entity nodes need a non-empty anchor");
    } else {
      bool sorted = true;
      for (std::size_t k = 1; k < node.anchor.size(); ++k) {
        if (node.anchor[k] <= node.anchor[k - 1]) sorted = false;
      }
      if (!sorted) add("anchor", {i}, {}, "anchor indices must be sorted and unique");
      if (node.anchor.front() < 0 || (token_count >= 0 && node.anchor.back() >= token_count)) {
        add("anchor", {i}, {}, "anchor index outside the sentence");
      }
    }
    if (node.kind == NodeKind::Trigger && node.label != kTriggerLabel) {
      add("label", {i}, {}, "trigger node label must be 'trigger'");
    }
    if (node.kind == NodeKind::Entity) {
      const bool ok = g.reduced ? node.label == kGenericEntityLabel
                                : o.has_entity_type(node.label);
      if (!ok) add("label", {i}, {}, "entity node label '" + node.label + "' not allowed");
    }
  }

  std::set<std::pair<int, int>> seen;
  std::vector<int> root_in(n, 0);
  for (int k = 0; k < static_cast<int>(g.edges.size()); ++k) {
    const GraphEdge& e = g.edges[k];
    if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
      add("edge-endpoint", {}, {k}, "edge endpoint does not exist");
      continue;
    }
    if (!seen.emplace(e.src, e.dst).second) {
      add("duplicate-edge", {e.src, e.dst}, {k}, "more than one edge for an ordered node pair");
    }
    if (e.src == e.dst) {
      add("self-loop", {e.src}, {k}, "self-loops are not licensed");
      continue;
    }
    const NodeKind sk = g.nodes[e.src].kind;
    const NodeKind dk = g.nodes[e.dst].kind;
    if (sk == NodeKind::Root) {
      if (dk != NodeKind::Trigger) {
        add("root-edge", {e.src, e.dst}, {k}, "root edge to non-trigger");
      } else {
        ++root_in[e.dst];
        if (!o.has_event_type(e.label)) {
          add("edge-label", {e.src, e.dst}, {k}, "root edge label '" + e.label +
                                                     "' is not an event type");
        }
      }
    } else if (sk == NodeKind::Trigger && dk == NodeKind::Entity) {
      if (!o.has_role(e.label)) {
        add("edge-label", {e.src, e.dst}, {k}, "argument edge label '" + e.label +
                                                   "' is not an argument role");
      }
    } else if (sk == NodeKind::Entity && dk == NodeKind::Entity) {
      if (g.reduced) {
        add("edge-shape", {e.src, e.dst}, {k}, "relation edge in a reduced graph");
      } else if (!o.has_relation_type(e.label)) {
        add("edge-label", {e.src, e.dst}, {k}, "relation edge label '" + e.label +
                                                   "' is not a relation type");
      }
    } else {
      add("edge-shape", {e.src, e.dst}, {k},
          "edge " + to_string(sk) + "->" + to_string(dk) + " is not licensed");
    }
  }
  for (int i = 0; i < n; ++i) {
    if (g.nodes[i].kind == NodeKind::Trigger && root_in[i] != 1) {
      add("trigger-root-edge", {i}, {},
          "trigger node has " + std::to_string(root_in[i]) + " incoming root edges (expected 1)");
    }
  }
  return out;
}

Annotations decode(const IEGraph& g, const Ontology& o, int token_count) {
  auto violations = validate(g, o, token_count);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "invalid graph for sentence '" << g.sentence_id << "':";
    for (const auto& v : violations) msg << " [" << v.rule << "] " << v.message << ";";
    throw Error(msg.str());
  }

  Annotations out;
  std::vector<std::string> ids(g.nodes.size());
  std::map<int, std::size_t> event_of_node;
  for (const auto& node : g.nodes) {
    if (node.kind == NodeKind::Entity) {
      ids[node.id] = node.ref.empty() ? "E" + std::to_string(node.id) : node.ref;
      out.entities.push_back({ids[node.id], node.label, anchor_span(node.anchor), std::nullopt});
    } else if (node.kind == NodeKind::Trigger) {
      ids[node.id] = node.ref.empty() ? "V" + std::to_string(node.id) : node.ref;
      event_of_node[node.id] = out.events.size();
      out.events.push_back({ids[node.id], "", anchor_span(node.anchor), {}});
    }
  }
  int relation_counter = 0;
  for (const auto& e : g.edges) {
    const NodeKind sk = g.nodes[e.src].kind;
    if (sk == NodeKind::Root) {
      out.events[event_of_node.at(e.dst)].type = e.label;
    } else if (sk == NodeKind::Trigger) {
      out.events[event_of_node.at(e.src)].arguments.push_back({ids[e.dst], e.label});
    } else {
      std::string rid = e.ref.empty() ? "R" + std::to_string(relation_counter) : e.ref;
      ++relation_counter;
      out.relations.push_back({rid, e.label, ids[e.src], ids[e.dst]});
    }
  }
  Sentence tmp;
  tmp.entities = std::move(out.entities);
  tmp.relations = std::move(out.relations);
  tmp.events = std::move(out.events);
  canonicalize(tmp);
  return {std::move(tmp.entities), std::move(tmp.relations), std::move(tmp.events)};
}

IEGraph reduce_graph(const IEGraph& g) {
  std::vector<bool> keep(g.nodes.size(), true);
  std::vector<bool> is_argument(g.nodes.size(), false);
  for (const auto& e : g.edges) {
    if (g.nodes[e.src].kind == NodeKind::Trigger && g.nodes[e.dst].kind == NodeKind::Entity) {
      is_argument[e.dst] = true;
    }
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].kind == NodeKind::Entity && !is_argument[i]) keep[i] = false;
  }
  std::vector<int> remap(g.nodes.size(), -1);
  IEGraph out;
  out.sentence_id = g.sentence_id;
  out.reduced = true;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!keep[i]) continue;
    GraphNode node = g.nodes[i];
    node.id = static_cast<int>(out.nodes.size());
    if (node.kind == NodeKind::Entity) node.label = kGenericEntityLabel;
    remap[i] = node.id;
    out.nodes.push_back(std::move(node));
  }
  for (const auto& e : g.edges) {
    if (g.nodes[e.src].kind == NodeKind::Entity && g.nodes[e.dst].kind == NodeKind::Entity) {
      continue;
    }
    if (remap[e.src] < 0 || remap[e.dst] < 0) continue;
    out.edges.push_back({remap[e.src], remap[e.dst], e.label, e.ref});
  }
  return out;
}

ordered_json to_json(const IEGraph& g) {
  ordered_json j;
  j["sentence_id"] = g.sentence_id;
  if (g.reduced) j["reduced"] = true;
  ordered_json nodes = ordered_json::array();
  for (const auto& n : g.nodes) {
    ordered_json jn;
    jn["id"] = n.id;
    jn["kind"] = to_string(n.kind);
    jn["label"] = n.kind == NodeKind::Root ? ordered_json(nullptr) : ordered_json(n.label);
    jn["anchor"] = n.anchor;
    if (!n.ref.empty()) jn["ref"] = n.ref;
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  ordered_json edges = ordered_json::array();
  for (const auto& e : g.edges) {
    ordered_json je;
    je["src"] = e.src;
    je["dst"] = e.dst;
    je["label"] = e.label;
    if (!e.ref.empty()) je["ref"] = e.ref;
    edges.push_back(std::move(je));
  }
  j["edges"] = std::move(edges);
  return j;
}

IEGraph graph_from_json(const json& j) {
  IEGraph g;
  try {
    g.sentence_id = j.value("sentence_id", std::string());
    g.reduced = j.value("reduced", false);
    for (const auto& jn : j.at("nodes")) {
      GraphNode n;
      n.id = jn.at("id").get<int>();
      n.kind = parse_node_kind(jn.at("kind").get<std::string>());
      if (jn.contains("label") && !jn.at("label").is_null()) {
        n.label = jn.at("label").get<std::string>();
      }
      n.anchor = jn.at("anchor").get<std::vector<int>>();
      n.ref = jn.value("ref", std::string());
      g.nodes.push_back(std::move(n));
    }
    for (const auto& je : j.at("edges")) {
      GraphEdge e;
      e.src = je.at("src").get<int>();
      e.dst = je.at("dst").get<int>();
      e.label = je.at("label").get<std::string>();
      e.ref = je.value("ref", std::string());
      g.edges.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw SchemaError(g.sentence_id, "graph", e.what());
  }
  return g;
}

GraphCorpus encode_corpus(const Corpus& c) {
  GraphCorpus gc;
  gc.schema_version = c.schema_version;
  gc.ontology = c.ontology;
  gc.variant = c.variant;
  for (const auto& s : c.sentences) {
    for (const auto& e : s.entities) {
      if (e.head) {
        throw SchemaError(s.id, "entities.head",
                          "graphs hold one span per entity; select a span variant first");
      }
    }
    Sentence header = s;
    header.entities.clear();
    header.relations.clear();
    header.events.clear();
    gc.sentences.push_back(std::move(header));
    gc.graphs.push_back(encode(s));
  }
  return gc;
}

Corpus decode_corpus(const GraphCorpus& gc) {
  Corpus c;
  c.schema_version = gc.schema_version;
  c.ontology = gc.ontology;
  c.variant = gc.variant;
  std::vector<std::string> failures;
  for (std::size_t i = 0; i < gc.graphs.size(); ++i) {
    Sentence s = gc.sentences.at(i);
    const int n_tokens = static_cast<int>(s.tokens.size());
    auto violations = validate(gc.graphs[i], gc.ontology, n_tokens);
    if (!violations.empty()) {
      std::ostringstream msg;
      msg << s.id << ":";
      for (const auto& v : violations) msg << " [" << v.rule << "] " << v.message << ";";
      failures.push_back(msg.str());
      continue;
    }
    Annotations a = decode(gc.graphs[i], gc.ontology, n_tokens);
    s.entities = std::move(a.entities);
    s.relations = std::move(a.relations);
    s.events = std::move(a.events);
    c.sentences.push_back(std::move(s));
  }
  if (!failures.empty()) {
    std::string msg = "invalid graphs:";
    for (const auto& f : failures) msg += "\n  " + f;
    throw Error(msg);
  }
  return c;
}

ordered_json to_json(const GraphCorpus& gc) {
  ordered_json j;
  j["schema_version"] = gc.schema_version;
  if (gc.variant) j["span_variant"] = to_string(*gc.variant);
  j["ontology"] = to_json(gc.ontology);
  ordered_json records = ordered_json::array();
  for (std::size_t i = 0; i < gc.graphs.size(); ++i) {
    records.push_back({{"sentence", sentence_header_json(gc.sentences[i])},
                       {"graph", to_json(gc.graphs[i])}});
  }
  j["graphs"] = std::move(records);
  return j;
}

GraphCorpus graph_corpus_from_json(const json& j) {
  GraphCorpus gc;
  if (!j.is_object() || !j.contains("graphs") || !j.contains("ontology")) {
    throw SchemaError("", "", "graph file needs 'ontology' and 'graphs'");
  }
  gc.schema_version = j.value("schema_version", std::string(kSchemaVersion));
  gc.ontology = ontology_from_json(j.at("ontology"));
  if (j.contains("span_variant")) {
    gc.variant = parse_span_variant(j.at("span_variant").get<std::string>());
  }
  for (const auto& rec : j.at("graphs")) {
    if (!rec.contains("sentence") || !rec.contains("graph")) {
      throw SchemaError("", "graphs[]", "record needs 'sentence' and 'graph'");
    }
    gc.sentences.push_back(sentence_header_from_json(rec.at("sentence")));
    gc.graphs.push_back(graph_from_json(rec.at("graph")));
  }
  return gc;
}

}  // namespace jsee
