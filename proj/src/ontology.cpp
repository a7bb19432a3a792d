#include "jsee/ontology.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "jsee/common.hpp"

namespace jsee {

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw SchemaError("", std::string("ontology.") + key, "missing string array");
  std::vector<std::string> out;
  for (const auto& item : j.at(key)) {
    if (!item.is_string())
      throw SchemaError("", std::string("ontology.") + key, "non-string entry");
    out.push_back(item.get<std::string>());
  }
  return out;
}

}  // namespace

bool Ontology::has_event_type(const std::string& s) const { return contains(event_types, s); }
bool Ontology::has_role(const std::string& s) const { return contains(argument_roles, s); }
bool Ontology::has_entity_type(const std::string& s) const { return contains(entity_types, s); }
bool Ontology::has_relation_type(const std::string& s) const {
  return contains(relation_types, s);
}

void Ontology::validate() const {
  std::map<std::string, std::string> owner;
  auto add = [&](const std::vector<std::string>& set, const char* what) {
    for (const auto& s : set) {
      if (s.empty()) throw SchemaError("", std::string("ontology.") + what, "empty symbol");
      auto [it, inserted] = owner.emplace(s, what);
      if (!inserted) {
        throw SchemaError("", std::string("ontology.") + what,
                          "symbol '" + s + "' already used in " + it->second);
      }
    }
  };
  // Edge labels share one namespace; node labels form another.
  add(event_types, "event_types");
  add(argument_roles, "argument_roles");
  add(relation_types, "relation_types");
  owner.clear();
  owner.emplace("trigger", "node labels");
  add(entity_types, "entity_types");
}

Ontology Ontology::ace05() {
  Ontology o;
  o.name = "ace05";
  o.event_types = {
      "Business:Declare-Bankruptcy", "Business:End-Org", "Business:Merge-Org",
      "Business:Start-Org", "Conflict:Attack", "Conflict:Demonstrate", "Contact:Meet",
      "Contact:Phone-Write", "Justice:Acquit", "Justice:Appeal", "Justice:Arrest-Jail",
      "Justice:Charge-Indict", "Justice:Convict", "Justice:Execute", "Justice:Extradite",
      "Justice:Fine", "Justice:Pardon", "Justice:Release-Parole", "Justice:Sentence",
      "Justice:Sue", "Justice:Trial-Hearing", "Life:Be-Born", "Life:Die", "Life:Divorce",
      "Life:Injure", "Life:Marry", "Movement:Transport", "Personnel:Elect",
      "Personnel:End-Position", "Personnel:Nominate", "Personnel:Start-Position",
      "Transaction:Transfer-Money", "Transaction:Transfer-Ownership"};
  o.argument_roles = {"Adjudicator", "Agent",  "Artifact",  "Attacker",    "Beneficiary",
                      "Buyer",       "Defendant", "Destination", "Entity", "Giver",
                      "Instrument",  "Org",    "Origin",    "Person",      "Place",
                      "Plaintiff",   "Prosecutor", "Recipient", "Seller",  "Target",
                      "Vehicle",     "Victim"};
  o.entity_types = {"FAC", "GPE", "LOC", "ORG", "PER", "VEH", "WEA"};
  o.relation_types = {"ART", "GEN-AFF", "ORG-AFF", "PART-WHOLE", "PER-SOC", "PHYS"};
  return o;
}

Ontology Ontology::rich_ere() {
  Ontology o;
  o.name = "rich_ere";
  o.event_types = {"conflict.attack",
                   "conflict.demonstrate",
                   "contact.broadcast",
                   "contact.contact",
                   "contact.correspondence",
                   "contact.meet",
                   "justice.arrestjail",
                   "life.die",
                   "life.injure",
                   "manufacture.artifact",
                   "movement.transportartifact",
                   "movement.transportperson",
                   "personnel.elect",
                   "personnel.endposition",
                   "personnel.startposition",
                   "transaction.transaction",
                   "transaction.transfermoney",
                   "transaction.transferownership"};
  o.argument_roles = {"agent",     "artifact", "attacker",  "audience", "beneficiary",
                      "destination", "entity", "giver",     "instrument", "money",
                      "origin",    "person",   "place",     "position", "recipient",
                      "target",    "thing",    "victim"};
  o.entity_types = {"PER",   "ORG",  "GPE",   "LOC",      "FAC",  "VEH", "WEA", "COM",
                    "TITLE", "MONEY", "TIME", "CRIME", "SENTENCE", "AGE", "URL"};
  o.relation_types = {"physical",           "partwhole",   "personalsocial",
                      "orgaffiliation",     "generalaffiliation", "sponsorship"};
  return o;
}

nlohmann::ordered_json to_json(const Ontology& o) {
  nlohmann::ordered_json j;
  j["name"] = o.name;
  j["event_types"] = o.event_types;
  j["argument_roles"] = o.argument_roles;
  j["entity_types"] = o.entity_types;
  j["relation_types"] = o.relation_types;
  return j;
}

Ontology ontology_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("", "ontology", "expected an object");
  Ontology o;
  if (j.contains("name") && j.at("name").is_string()) o.name = j.at("name").get<std::string>();
  o.event_types = string_list(j, "event_types");
  o.argument_roles = string_list(j, "argument_roles");
  o.entity_types = string_list(j, "entity_types");
  o.relation_types = string_list(j, "relation_types");
  o.validate();
  return o;
}

Ontology load_ontology(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", "ontology", std::string("invalid JSON: ") + e.what());
  }
  return ontology_from_json(j);
}

}  // namespace jsee
