#include "jsee/synthetic.hpp"

#include <random>

#include "jsee/common.hpp"

namespace jsee {

namespace {

int code_points(const std::string& s) {
  int n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

struct Lexicon {
  std::vector<std::string> people, places, orgs, vehicles;
};

const Lexicon& lexicon(const std::string& lang) {
  static const Lexicon en{{"John", "Mary", "Alice", "Peter", "Sarah", "David", "Laura", "Tom"},
                          {"Paris", "Boston", "Cairo", "Madrid", "Tokyo", "Berlin"},
                          {"Acme", "Reuters", "Unicef", "Boeing"},
                          {"car", "truck", "boat", "bike"}};
  static const Lexicon es{{"Juan", "María", "Carlos", "Lucía", "Pedro", "Ana", "Diego", "Elena"},
                          {"Lima", "Quito", "Bogotá", "Sevilla", "Roma", "Caracas"},
                          {"Telefónica", "Repsol", "Iberia", "Pemex"},
                          {"coche", "camión", "barco", "moto"}};
  static const Lexicon zh{{"张伟", "李娜", "王芳", "刘洋", "陈静", "杨光", "赵磊", "周敏"},
                          {"北京", "上海", "广州", "南京", "天津", "重庆"},
                          {"华为", "联想", "新华社", "海尔"},
                          {"汽车", "卡车", "轮船", "摩托"}};
  if (lang == "en") return en;
  if (lang == "es") return es;
  if (lang == "zh") return zh;
  throw Error("no synthetic lexicon for language '" + lang + "'");
}

class Picker {
 public:
  explicit Picker(std::mt19937_64& rng) : rng_(rng) {}

  // Two distinct entries.
  std::pair<std::string, std::string> two(const std::vector<std::string>& v) {
    const std::size_t a = rng_() % v.size();
    const std::size_t b = (a + 1 + rng_() % (v.size() - 1)) % v.size();
    return {v[a], v[b]};
  }
  const std::string& one(const std::vector<std::string>& v) { return v[rng_() % v.size()]; }

 private:
  std::mt19937_64& rng_;
};

// Someone buys a vehicle from someone: one trigger, two events.
void purchase(SentenceBuilder& b, const std::string& lang, Picker& pick) {
  const Lexicon& lx = lexicon(lang);
  const auto [p1, p2] = pick.two(lx.people);
  const std::string& g = pick.one(lx.places);
  const std::string& v = pick.one(lx.vehicles);
  Span buyer, seller, place, trigger, thing;
  std::optional<Span> thing_head;
  if (lang == "zh") {
    buyer = b.word(p1);
    b.word("在");
    place = b.word(g);
    b.word("从");
    seller = b.word(p2);
    trigger = b.word("买");
    b.word("了");
    thing = b.word(v);
    b.word("。");
  } else {
    buyer = b.word(p1);
    trigger = b.word(lang == "en" ? "bought" : "compró");
    const Span det = b.word(lang == "en" ? "a" : "un");
    thing_head = b.word(v);
    thing = {det.start, thing_head->end};
    b.word(lang == "en" ? "from" : "a");
    seller = b.word(p2);
    b.word(lang == "en" ? "in" : "en");
    place = b.word(g);
    b.word(".");
  }
  const auto e_buyer = b.entity("PER", buyer);
  const auto e_seller = b.entity("PER", seller);
  const auto e_place = b.entity("GPE", place);
  const auto e_thing = b.entity("VEH", thing, thing_head);
  b.relation("physical", e_buyer, e_place);
  b.event("transaction.transferownership", trigger,
          {{e_buyer, "recipient"}, {e_seller, "giver"}, {e_thing, "thing"}, {e_place, "place"}});
  b.event("transaction.transfermoney", trigger,
          {{e_buyer, "giver"}, {e_seller, "recipient"}, {e_place, "place"}});
}

void attack(SentenceBuilder& b, const std::string& lang, Picker& pick) {
  const Lexicon& lx = lexicon(lang);
  const auto [p1, p2] = pick.two(lx.people);
  const std::string& g = pick.one(lx.places);
  Span attacker, target, place, trigger;
  if (lang == "zh") {
    attacker = b.word(p1);
    b.word("在");
    place = b.word(g);
    trigger = b.word("袭击");
    b.word("了");
    target = b.word(p2);
    b.word("。");
  } else {
    attacker = b.word(p1);
    trigger = b.word(lang == "en" ? "attacked" : "atacó");
    if (lang == "es") b.word("a");
    target = b.word(p2);
    b.word(lang == "en" ? "in" : "en");
    place = b.word(g);
    b.word(".");
  }
  const auto e_attacker = b.entity("PER", attacker);
  const auto e_target = b.entity("PER", target);
  const auto e_place = b.entity("GPE", place);
  b.event("conflict.attack", trigger,
          {{e_attacker, "attacker"}, {e_target, "target"}, {e_place, "place"}});
}

// "The attack victims met X in Y": a trigger inside an entity mention.
void victims(SentenceBuilder& b, const std::string& lang, Picker& pick) {
  const Lexicon& lx = lexicon(lang);
  const std::string& p = pick.one(lx.people);
  const std::string& g = pick.one(lx.places);
  Span group, head, attack_trigger, meet_trigger, person, place;
  if (lang == "en") {
    const Span det = b.word("The");
    attack_trigger = b.word("attack");
    head = b.word("victims");
    group = {det.start, head.end};
    meet_trigger = b.word("met");
    person = b.word(p);
    b.word("in");
    place = b.word(g);
    b.word(".");
  } else if (lang == "es") {
    const Span det = b.word("Las");
    head = b.word("víctimas");
    b.word("del");
    attack_trigger = b.word("ataque");
    group = {det.start, attack_trigger.end};
    b.word("se");
    meet_trigger = b.word("reunieron");
    b.word("con");
    person = b.word(p);
    b.word("en");
    place = b.word(g);
    b.word(".");
  } else {
    attack_trigger = b.word("袭击");
    head = b.word("受害者");
    group = {attack_trigger.start, head.end};
    b.word("在");
    place = b.word(g);
    meet_trigger = b.word("会见");
    b.word("了");
    person = b.word(p);
    b.word("。");
  }
  const auto e_group = b.entity("PER", group, head);
  const auto e_person = b.entity("PER", person);
  const auto e_place = b.entity("GPE", place);
  b.event("conflict.attack", attack_trigger, {{e_group, "victim"}});
  b.event("contact.meet", meet_trigger,
          {{e_group, "entity"}, {e_person, "entity"}, {e_place, "place"}});
}

// "The X minister visited Y": a place nested in a person mention.
void minister(SentenceBuilder& b, const std::string& lang, Picker& pick) {
  const Lexicon& lx = lexicon(lang);
  const auto [g1, g2] = pick.two(lx.places);
  Span official, head, home, trigger, destination;
  if (lang == "en") {
    const Span det = b.word("The");
    home = b.word(g1);
    head = b.word("minister");
    official = {det.start, head.end};
    trigger = b.word("visited");
    destination = b.word(g2);
    b.word(".");
  } else if (lang == "es") {
    const Span det = b.word("El");
    head = b.word("ministro");
    b.word("de");
    home = b.word(g1);
    official = {det.start, home.end};
    trigger = b.word("visitó");
    destination = b.word(g2);
    b.word(".");
  } else {
    home = b.word(g1);
    head = b.word("部长");
    official = {home.start, head.end};
    trigger = b.word("访问");
    b.word("了");
    destination = b.word(g2);
    b.word("。");
  }
  const auto e_official = b.entity("PER", official, head);
  const auto e_home = b.entity("GPE", home);
  const auto e_destination = b.entity("GPE", destination);
  b.relation("generalaffiliation", e_official, e_home);
  b.event("movement.transportperson", trigger,
          {{e_official, "person"}, {e_destination, "destination"}});
}

void membership(SentenceBuilder& b, const std::string& lang, Picker& pick) {
  const Lexicon& lx = lexicon(lang);
  const std::string& p = pick.one(lx.people);
  const std::string& o = pick.one(lx.orgs);
  Span person, org;
  if (lang == "en") {
    person = b.word(p);
    b.words({"is", "a", "member", "of"});
    org = b.word(o);
    b.word(".");
  } else if (lang == "es") {
    person = b.word(p);
    b.words({"es", "miembro", "de"});
    org = b.word(o);
    b.word(".");
  } else {
    person = b.word(p);
    b.word("是");
    org = b.word(o);
    b.words({"的", "成员", "。"});
  }
  b.relation("orgaffiliation", b.entity("PER", person), b.entity("ORG", org));
}

}  // namespace

SentenceBuilder::SentenceBuilder(std::string id, std::string doc_id, std::string lang) {
  s_.id = std::move(id);
  s_.doc_id = std::move(doc_id);
  s_.lang = std::move(lang);
}

Span SentenceBuilder::words(const std::vector<std::string>& tokens) {
  const int start = static_cast<int>(s_.tokens.size());
  for (const auto& t : tokens) {
    s_.tokens.push_back({static_cast<int>(s_.tokens.size()), t, 0, 0});
  }
  return {start, static_cast<int>(s_.tokens.size())};
}

std::string SentenceBuilder::entity(const std::string& type, Span full, std::optional<Span> head) {
  std::string id = s_.id + "-E" + std::to_string(s_.entities.size());
  s_.entities.push_back({id, type, full, head});
  return id;
}

std::string SentenceBuilder::relation(const std::string& type, const std::string& arg1,
                                      const std::string& arg2) {
  std::string id = s_.id + "-R" + std::to_string(s_.relations.size());
  s_.relations.push_back({id, type, arg1, arg2});
  return id;
}

std::string SentenceBuilder::event(const std::string& type, Span trigger,
                                   std::vector<Argument> arguments) {
  std::string id = s_.id + "-V" + std::to_string(s_.events.size());
  s_.events.push_back({id, type, trigger, std::move(arguments)});
  return id;
}

Sentence SentenceBuilder::build() const {
  Sentence s = s_;
  const bool spaced = s.lang != "zh";
  s.text.clear();
  int offset = 0;
  for (auto& t : s.tokens) {
    if (spaced && t.index > 0) {
      s.text += ' ';
      ++offset;
    }
    t.char_start = offset;
    s.text += t.text;
    offset += code_points(t.text);
    t.char_end = offset;
  }
  canonicalize(s);
  return s;
}

Sentence figure1_sentence() {
  SentenceBuilder b("fig1", "fig1", "en");
  const Span i = b.word("I");
  b.words({",", "purposely"});
  const Span buy = b.word("buy");
  const Span things = b.word("things");
  const Span made = b.word("made");
  b.word("in");
  const Span canada = b.word("Canada");
  b.word("or");
  const Span usa = b.word("USA");
  b.word(".");
  const auto e_i = b.entity("PER", i);
  const auto e_things = b.entity("COM", {things.start, usa.end}, things);
  const auto e_canada = b.entity("GPE", canada);
  const auto e_usa = b.entity("GPE", usa);
  b.event("transaction.transfermoney", buy, {{e_i, "giver"}});
  b.event("transaction.transferownership", buy, {{e_i, "recipient"}, {e_things, "thing"}});
  b.event("manufacture.artifact", made, {{e_things, "artifact"}, {e_canada, "place"}});
  b.event("manufacture.artifact", made, {{e_things, "artifact"}, {e_usa, "place"}});
  return b.build();
}

Sentence figure2_sentence() {
  SentenceBuilder b("fig2", "fig2", "en");
  const Span school_district = b.words({"School", "district"});
  const Span officials = b.word("officials");
  b.words({"have", "estimated", "the"});
  const Span cost = b.word("cost");
  b.word("of");
  const Span rebuilding = b.word("rebuilding");
  const Span an = b.word("an");
  b.word("intermediate");
  const Span school = b.word("school");
  b.word("at");
  const Span money = b.words({"$40", "million"});
  b.word(".");
  const auto e_officials = b.entity("PER", {school_district.start, officials.end}, officials);
  const auto e_district = b.entity("ORG", school_district, Span{1, 2});
  const auto e_school = b.entity("FAC", {an.start, school.end}, school);
  const auto e_money = b.entity("MONEY", money);
  b.relation("orgaffiliation", e_officials, e_district);
  b.event("transaction.transfermoney", cost, {{e_money, "money"}});
  b.event("transaction.transferownership", cost, {{e_school, "thing"}});
  b.event("manufacture.artifact", rebuilding, {{e_school, "artifact"}});
  return b.build();
}

Corpus figure_corpus() {
  Corpus c;
  c.ontology = Ontology::rich_ere();
  c.sentences = {figure1_sentence(), figure2_sentence()};
  validate_corpus(c);
  return c;
}

Corpus make_synthetic_corpus(const SyntheticOptions& options) {
  if (options.langs.empty()) throw Error("synthetic corpus needs at least one language");
  if (options.sentences_per_doc == 0) throw Error("sentences_per_doc must be positive");
  using Template = void (*)(SentenceBuilder&, const std::string&, Picker&);
  static constexpr Template kTemplates[] = {purchase, attack, victims, minister, membership};
  constexpr std::size_t kTemplateCount = std::size(kTemplates);

  std::mt19937_64 rng(options.seed);
  Picker pick(rng);
  Corpus c;
  c.ontology = Ontology::rich_ere();
  const std::size_t L = options.langs.size();
  for (std::size_t i = 0; i < options.sentences; ++i) {
    const std::string& lang = options.langs[i % L];
    const std::size_t doc = i / options.sentences_per_doc;
    SentenceBuilder b("syn-" + std::to_string(i), "doc-" + std::to_string(doc), lang);
    kTemplates[(i / L) % kTemplateCount](b, lang, pick);
    c.sentences.push_back(b.build());
  }
  validate_corpus(c);
  return c;
}

}  // namespace jsee
