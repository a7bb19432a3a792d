#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace jsee {

// Ordered symbol inventories of one annotation scheme. Event types, roles and
// relation types are pairwise disjoint so an edge label identifies its
// category; entity types only need to differ from "trigger".
struct Ontology {
  std::string name;
  std::vector<std::string> event_types;
  std::vector<std::string> argument_roles;
  std::vector<std::string> entity_types;
  std::vector<std::string> relation_types;

  bool has_event_type(const std::string& s) const;
  bool has_role(const std::string& s) const;
  bool has_entity_type(const std::string& s) const;
  bool has_relation_type(const std::string& s) const;

  // Throws SchemaError on duplicates, empty symbols or overlapping edge labels.
  void validate() const;

  bool operator==(const Ontology&) const = default;

  // 33 event types, 22 roles, 7 entity types, 6 relation types.
  static Ontology ace05();
  // 18 event types, 18 roles, 15 entity types, 6 relation types.
  static Ontology rich_ere();
};

nlohmann::ordered_json to_json(const Ontology& o);
Ontology ontology_from_json(const nlohmann::json& j);
Ontology load_ontology(const std::string& path);

}  // namespace jsee
