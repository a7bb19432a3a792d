#include "jsee/nesting.hpp"

#include <iomanip>
#include <sstream>
#include <vector>

namespace jsee {

NestingReport& NestingReport::operator+=(const NestingReport& o) {
  trg_trg += o.trg_trg;
  ent_ent += o.ent_ent;
  trg_ent += o.trg_ent;
  trg_trg_mentions += o.trg_trg_mentions;
  ent_ent_mentions += o.ent_ent_mentions;
  trg_ent_mentions += o.trg_ent_mentions;
  nested_sents += o.nested_sents;
  all_sents += o.all_sents;
  return *this;
}

bool spans_nested(const Span& a, const Span& b) { return a.overlaps(b); }

NestingReport count_nesting(const Sentence& s) {
  NestingReport r;
  r.all_sents = 1;
  const std::size_t ne = s.events.size();
  const std::size_t nn = s.entities.size();

  std::vector<char> trg_in_tt(ne, 0), ent_in_ee(nn, 0), trg_in_te(ne, 0), ent_in_te(nn, 0);
  for (std::size_t i = 0; i < ne; ++i) {
    for (std::size_t j = i + 1; j < ne; ++j) {
      if (spans_nested(s.events[i].trigger, s.events[j].trigger)) {
        ++r.trg_trg;
        trg_in_tt[i] = trg_in_tt[j] = 1;
      }
    }
  }
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t j = i + 1; j < nn; ++j) {
      if (spans_nested(s.entities[i].span, s.entities[j].span)) {
        ++r.ent_ent;
        ent_in_ee[i] = ent_in_ee[j] = 1;
      }
    }
  }
  for (std::size_t i = 0; i < ne; ++i) {
    for (std::size_t j = 0; j < nn; ++j) {
      if (spans_nested(s.events[i].trigger, s.entities[j].span)) {
        ++r.trg_ent;
        trg_in_te[i] = ent_in_te[j] = 1;
      }
    }
  }
  auto count = [](const std::vector<char>& v) {
    std::int64_t n = 0;
    for (char c : v) n += c;
    return n;
  };
  r.trg_trg_mentions = count(trg_in_tt);
  r.ent_ent_mentions = count(ent_in_ee);
  r.trg_ent_mentions = count(trg_in_te) + count(ent_in_te);
  r.nested_sents = (r.trg_trg + r.ent_ent + r.trg_ent) > 0 ? 1 : 0;
  return r;
}

bool is_nested(const Sentence& s) { return count_nesting(s).nested_sents > 0; }

NestingReport count_nesting(const Corpus& c) {
  const std::int64_t n = static_cast<std::int64_t>(c.sentences.size());
  std::vector<NestingReport> per(c.sentences.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) per[i] = count_nesting(c.sentences[i]);
  NestingReport total;
  for (const auto& r : per) total += r;
  return total;
}

std::pair<Corpus, Corpus> partition_nested(const Corpus& c) {
  Corpus nested, plain;
  for (Corpus* part : {&nested, &plain}) {
    part->schema_version = c.schema_version;
    part->ontology = c.ontology;
    part->split = c.split;
    part->variant = c.variant;
  }
  for (const auto& s : c.sentences) (is_nested(s) ? nested : plain).sentences.push_back(s);
  return {std::move(nested), std::move(plain)};
}

nlohmann::ordered_json to_json(const NestingReport& r) {
  return {{"trg_trg", r.trg_trg},
          {"ent_ent", r.ent_ent},
          {"trg_ent", r.trg_ent},
          {"nested_sents", r.nested_sents},
          {"all_sents", r.all_sents},
          {"mentions",
           {{"trg_trg", r.trg_trg_mentions},
            {"ent_ent", r.ent_ent_mentions},
            {"trg_ent", r.trg_ent_mentions}}}};
}

std::string format_nesting_table(const NestingReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "" << std::setw(10) << "Trg-Trg" << std::setw(10)
      << "Ent-Ent" << std::setw(10) << "Trg-Ent" << std::setw(10) << "Nested" << "All\n";
  out << std::setw(10) << "pairs" << std::setw(10) << r.trg_trg << std::setw(10) << r.ent_ent
      << std::setw(10) << r.trg_ent << std::setw(10) << r.nested_sents << r.all_sents << "\n";
  out << std::setw(10) << "mentions" << std::setw(10) << r.trg_trg_mentions << std::setw(10)
      << r.ent_ent_mentions << std::setw(10) << r.trg_ent_mentions << std::setw(10)
      << r.nested_sents << r.all_sents << "\n";
  return out.str();
}

}  // namespace jsee
