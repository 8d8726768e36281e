// SPDX-License-Identifier: Apache-2.0
#include "kane/kg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "kane/error.hpp"

namespace kane {

std::uint32_t Interner::intern(std::string_view name) {
  auto it = ids_.find(std::string(name));
  if (it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> Interner::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

namespace {

// Decodes one code point starting at text[i]; returns its byte length or 0
// when the sequence is malformed.
std::size_t decode_utf8(std::string_view text, std::size_t i, char32_t& cp) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  std::size_t len;
  char32_t min;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > text.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(text[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

bool is_unicode_space(char32_t cp) {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000;
}

struct Line {
  std::size_t number;
  std::string_view text;
};

// Yields the non-blank, non-comment lines with a trailing CR removed.
std::vector<Line> content_lines(std::string_view text, std::string_view source) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    validate_utf8(line, source, number);
    const bool blank = line.find_first_not_of(" \t") == std::string_view::npos;
    if (blank || line.front() == '#') continue;
    out.push_back({number, line});
  }
  return out;
}

std::vector<std::string_view> split_fields(const Line& line, std::size_t expected,
                                           std::string_view source) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.text.find('\t', pos);
    if (tab == std::string_view::npos) {
      fields.push_back(line.text.substr(pos));
      break;
    }
    fields.push_back(line.text.substr(pos, tab - pos));
    pos = tab + 1;
  }
  if (fields.size() != expected) {
    throw ParseError(std::string(source), line.number,
                     "expected " + std::to_string(expected) + " tab-separated fields, found " +
                         std::to_string(fields.size()));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].empty()) {
      throw ParseError(std::string(source), line.number,
                       "field " + std::to_string(i + 1) + " is empty");
    }
  }
  return fields;
}

}  // namespace

void validate_utf8(std::string_view text, std::string_view source, std::size_t line) {
  for (std::size_t i = 0; i < text.size();) {
    char32_t cp;
    const auto len = decode_utf8(text, i, cp);
    if (len == 0) {
      throw ParseError(std::string(source), line,
                       "invalid UTF-8 at byte " + std::to_string(i + 1));
    }
    i += len;
  }
}

std::vector<std::string> tokenize(std::string_view literal) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < literal.size();) {
    char32_t cp;
    auto len = decode_utf8(literal, i, cp);
    if (len == 0) {
      // Only reachable when called on unvalidated text; treat the byte as opaque.
      len = 1;
      cp = 0xFFFD;
    }
    if (is_unicode_space(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (cp < 0x80) {
      auto c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      current.push_back(c);
    } else {
      current.append(literal.substr(i, len));
    }
    i += len;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

RelationId KnowledgeGraph::intern_relation(std::string_view name) {
  const auto id = relations_.intern(name);
  if (id >= attribute_relation_.size()) {
    attribute_relation_.resize(id + 1, false);
    entity_relation_.resize(id + 1, false);
  }
  return {id};
}

ValueId KnowledgeGraph::intern_value(std::string_view literal) {
  if (auto found = literals_.find(literal)) return {*found};
  auto tokens = tokenize(literal);
  if (tokens.empty()) throw ContractError("attribute literal has no tokens");
  const auto id = literals_.intern(literal);
  AttributeValue value{std::string(literal), {}};
  for (const auto& tok : tokens) value.tokens.push_back({words_.intern(tok)});
  values_.push_back(std::move(value));
  return {id};
}

std::size_t KnowledgeGraph::add_relation_triples(std::span<const RelationTriple> triples) {
  std::set<RelationTriple> seen(relation_triples_.begin(), relation_triples_.end());
  std::size_t dups = 0;
  for (const auto& t : triples) {
    if (t.head.v >= entity_count() || t.tail.v >= entity_count() ||
        t.relation.v >= relation_count()) {
      throw LookupError("relation triple refers to an id that was never interned");
    }
    if (!seen.insert(t).second) {
      ++dups;
      continue;
    }
    relation_triples_.push_back(t);
    entity_relation_[t.relation.v] = true;
  }
  duplicates_dropped_ += dups;
  return dups;
}

std::size_t KnowledgeGraph::add_attribute_triples(std::span<const AttributeTriple> triples) {
  std::set<AttributeTriple> seen(attribute_triples_.begin(), attribute_triples_.end());
  std::size_t dups = 0;
  for (const auto& t : triples) {
    if (t.head.v >= entity_count() || t.value.v >= value_count() ||
        t.relation.v >= relation_count()) {
      throw LookupError("attribute triple refers to an id that was never interned");
    }
    if (!seen.insert(t).second) {
      ++dups;
      continue;
    }
    attribute_triples_.push_back(t);
    attribute_relation_[t.relation.v] = true;
  }
  duplicates_dropped_ += dups;
  return dups;
}

std::size_t KnowledgeGraph::attribute_relation_count() const {
  return static_cast<std::size_t>(
      std::count(attribute_relation_.begin(), attribute_relation_.end(), true));
}

std::size_t KnowledgeGraph::entity_relation_count() const {
  return static_cast<std::size_t>(
      std::count(entity_relation_.begin(), entity_relation_.end(), true));
}

std::vector<RelationTriple> parse_relation_triples(std::string_view text, KnowledgeGraph& kg,
                                                   std::string_view source) {
  std::vector<RelationTriple> out;
  for (const auto& line : content_lines(text, source)) {
    const auto f = split_fields(line, 3, source);
    const auto h = kg.intern_entity(f[0]);
    const auto r = kg.intern_relation(f[1]);
    const auto t = kg.intern_entity(f[2]);
    out.push_back({h, r, t});
  }
  return out;
}

std::vector<AttributeTriple> parse_attribute_triples(std::string_view text, KnowledgeGraph& kg,
                                                     std::string_view source) {
  std::vector<AttributeTriple> out;
  for (const auto& line : content_lines(text, source)) {
    const auto f = split_fields(line, 3, source);
    auto literal = f[2];
    if (literal.size() >= 2 && literal.front() == '"' && literal.back() == '"') {
      literal = literal.substr(1, literal.size() - 2);
    }
    if (tokenize(literal).empty()) {
      throw ParseError(std::string(source), line.number, "attribute literal is empty");
    }
    const auto h = kg.intern_entity(f[0]);
    const auto r = kg.intern_relation(f[1]);
    out.push_back({h, r, kg.intern_value(literal)});
  }
  return out;
}

std::vector<Label> parse_labels(std::string_view text, const KnowledgeGraph& kg,
                                Interner& classes, std::string_view source) {
  std::vector<Label> out;
  std::vector<bool> seen(kg.entity_count(), false);
  for (const auto& line : content_lines(text, source)) {
    const auto f = split_fields(line, 2, source);
    const auto e = kg.entities().find(f[0]);
    if (!e) {
      throw ParseError(std::string(source), line.number,
                       "unknown entity '" + std::string(f[0]) + "'");
    }
    if (seen[*e]) {
      throw ParseError(std::string(source), line.number,
                       "entity '" + std::string(f[0]) + "' labeled twice");
    }
    seen[*e] = true;
    out.push_back({{*e}, {classes.intern(f[1])}});
  }
  return out;
}

std::string serialize_relation_triples(const KnowledgeGraph& kg) {
  std::string out;
  for (const auto& t : kg.relation_triples()) {
    out += kg.entities().name(t.head.v) + '\t' + kg.relations().name(t.relation.v) + '\t' +
           kg.entities().name(t.tail.v) + '\n';
  }
  return out;
}

std::string serialize_attribute_triples(const KnowledgeGraph& kg) {
  std::string out;
  for (const auto& t : kg.attribute_triples()) {
    out += kg.entities().name(t.head.v) + '\t' + kg.relations().name(t.relation.v) + "\t\"" +
           kg.value(t.value).literal + "\"\n";
  }
  return out;
}

std::string serialize_labels(const KnowledgeGraph& kg, std::span<const Label> labels,
                             const Interner& classes) {
  std::string out;
  for (const auto& l : labels) {
    out += kg.entities().name(l.entity.v) + '\t' + classes.name(l.cls.v) + '\n';
  }
  return out;
}

std::size_t Neighborhood::total() const {
  std::size_t n = 0;
  for (const auto& l : lists_) n += l.size();
  return n;
}

Neighborhood build_neighborhood(std::size_t entity_count,
                                std::span<const RelationTriple> relation_triples,
                                std::span<const AttributeTriple> attribute_triples) {
  std::vector<std::vector<Neighbor>> lists(entity_count);
  for (const auto& t : relation_triples) {
    lists.at(t.head.v).push_back({t.relation, Neighbor::Kind::Entity, t.tail.v});
  }
  for (const auto& t : attribute_triples) {
    lists.at(t.head.v).push_back({t.relation, Neighbor::Kind::Value, t.value.v});
  }
  return Neighborhood(std::move(lists));
}

Neighborhood build_neighborhood(const KnowledgeGraph& kg) {
  return build_neighborhood(kg.entity_count(), kg.relation_triples(), kg.attribute_triples());
}

DatasetSplit split_dataset(const KnowledgeGraph& kg, std::span<const Label> labels,
                           Interner classes, Rng& rng, SplitFractions fractions) {
  if (fractions.valid < 0 || fractions.test < 0 || fractions.valid + fractions.test >= 1) {
    throw ConfigError("split fractions must be non-negative and sum below 1");
  }
  DatasetSplit split;
  std::vector<RelationTriple> triples = kg.relation_triples();
  rng.shuffle(triples);

  const auto n = triples.size();
  const auto want_valid = static_cast<std::size_t>(std::llround(fractions.valid * n));
  const auto want_test = static_cast<std::size_t>(std::llround(fractions.test * n));

  std::vector<std::size_t> entity_uses(kg.entity_count(), 0);
  std::vector<std::size_t> relation_uses(kg.relation_count(), 0);
  for (const auto& t : triples) {
    ++entity_uses[t.head.v];
    ++entity_uses[t.tail.v];
    ++relation_uses[t.relation.v];
  }
  for (const auto& t : triples) {
    const bool want_more = split.valid.size() < want_valid || split.test.size() < want_test;
    const std::size_t need_h = t.head == t.tail ? 3 : 2;
    const bool movable = want_more && entity_uses[t.head.v] >= need_h &&
                         entity_uses[t.tail.v] >= need_h && relation_uses[t.relation.v] >= 2;
    if (!movable) {
      split.train.push_back(t);
      continue;
    }
    --entity_uses[t.head.v];
    --entity_uses[t.tail.v];
    --relation_uses[t.relation.v];
    (split.valid.size() < want_valid ? split.valid : split.test).push_back(t);
  }

  split.classes = std::move(classes);
  split.labels.assign(kg.entity_count(), std::nullopt);
  std::vector<EntityId> labeled;
  for (const auto& l : labels) {
    split.labels.at(l.entity.v) = l.cls;
    labeled.push_back(l.entity);
  }
  rng.shuffle(labeled);
  const auto m = labeled.size();
  const auto lv = static_cast<std::size_t>(std::llround(fractions.valid * m));
  const auto lt = static_cast<std::size_t>(std::llround(fractions.test * m));
  for (std::size_t i = 0; i < m; ++i) {
    if (i < lv) {
      split.label_valid.push_back(labeled[i]);
    } else if (i < lv + lt) {
      split.label_test.push_back(labeled[i]);
    } else {
      split.label_train.push_back(labeled[i]);
    }
  }
  return split;
}

void check_split(const KnowledgeGraph& kg, const DatasetSplit& split) {
  std::set<RelationTriple> train(split.train.begin(), split.train.end());
  std::set<RelationTriple> valid(split.valid.begin(), split.valid.end());
  std::vector<bool> entity_seen(kg.entity_count(), false);
  std::vector<bool> relation_seen(kg.relation_count(), false);
  for (const auto& t : split.train) {
    entity_seen.at(t.head.v) = entity_seen.at(t.tail.v) = true;
    relation_seen.at(t.relation.v) = true;
  }
  auto check_held_out = [&](const std::vector<RelationTriple>& part, const char* name) {
    for (const auto& t : part) {
      if (train.count(t)) throw ContractError(std::string(name) + " triple also in train");
      if (!entity_seen.at(t.head.v) || !entity_seen.at(t.tail.v)) {
        throw ContractError(std::string(name) + " triple uses an entity unseen in train");
      }
      if (!relation_seen.at(t.relation.v)) {
        throw ContractError(std::string(name) + " triple uses a relation unseen in train");
      }
    }
  };
  check_held_out(split.valid, "valid");
  check_held_out(split.test, "test");
  for (const auto& t : split.test) {
    if (valid.count(t)) throw ContractError("test triple also in valid");
  }
  if (split.train.size() + split.valid.size() + split.test.size() != kg.relation_triples().size()) {
    throw ContractError("split does not cover every relation triple");
  }
  std::set<EntityId> lt(split.label_train.begin(), split.label_train.end());
  std::set<EntityId> lv(split.label_valid.begin(), split.label_valid.end());
  for (auto e : split.label_valid) {
    if (lt.count(e)) throw ContractError("labeled entity in both train and valid");
  }
  for (auto e : split.label_test) {
    if (lt.count(e) || lv.count(e)) throw ContractError("labeled test entity reused");
  }
}

namespace {

// 0, +1, -1, +2, -2, ... wrapped so |shift| < clusters.
int relation_shift(std::size_t j, std::size_t clusters) {
  if (j == 0) return 0;
  const auto span = static_cast<int>(clusters) - 1;
  const int magnitude = 1 + static_cast<int>((j - 1) / 2) % span;
  return (j % 2 == 1) ? magnitude : -magnitude;
}

}  // namespace

SyntheticDataset generate_synthetic_kg(const SyntheticSpec& spec) {
  if (spec.clusters < 2) throw ConfigError("synthetic KG needs at least 2 clusters");
  if (spec.entities < spec.clusters) throw ConfigError("synthetic KG needs entities >= clusters");
  if (spec.relations < 1) throw ConfigError("synthetic KG needs at least 1 relation");
  if (spec.triples_per_entity < 1) throw ConfigError("triples_per_entity must be >= 1");
  if (spec.noise < 0 || spec.noise > 1) throw ConfigError("noise must lie in [0, 1]");

  SyntheticDataset out;
  Rng rng(spec.seed);
  auto& kg = out.kg;
  const auto n = spec.entities;
  const auto clusters = spec.clusters;

  std::vector<std::size_t> cluster_of(n);
  for (std::size_t i = 0; i < n; ++i) cluster_of[i] = i % clusters;
  rng.shuffle(cluster_of);
  std::vector<std::vector<std::uint32_t>> members(clusters);
  for (std::size_t i = 0; i < n; ++i) {
    kg.intern_entity("e" + std::to_string(i));
    members[cluster_of[i]].push_back(static_cast<std::uint32_t>(i));
  }
  for (std::size_t c = 0; c < clusters; ++c) out.classes.intern("cluster" + std::to_string(c));
  std::vector<RelationId> relations;
  for (std::size_t j = 0; j < spec.relations; ++j) {
    relations.push_back(kg.intern_relation("r" + std::to_string(j)));
  }

  std::vector<RelationTriple> triples;
  for (std::uint32_t h = 0; h < n; ++h) {
    const auto c = static_cast<int>(cluster_of[h]);
    std::vector<std::pair<std::size_t, std::uint32_t>> options;  // (relation, target cluster)
    for (std::size_t j = 0; j < spec.relations; ++j) {
      const int target = c + relation_shift(j, clusters);
      if (target < 0 || target >= static_cast<int>(clusters)) continue;
      const auto& pool = members[static_cast<std::size_t>(target)];
      if (pool.size() == 1 && pool.front() == h) continue;
      options.emplace_back(j, static_cast<std::uint32_t>(target));
    }
    if (options.empty()) continue;
    for (std::size_t d = 0; d < spec.triples_per_entity; ++d) {
      const auto [j, target] = options[rng.below(options.size())];
      std::uint32_t t;
      if (rng.bernoulli(spec.noise)) {
        do {
          t = static_cast<std::uint32_t>(rng.below(n));
        } while (t == h);
      } else {
        const auto& pool = members[target];
        do {
          t = pool[rng.below(pool.size())];
        } while (t == h);
      }
      triples.push_back({{h}, relations[j], {t}});
    }
  }
  kg.add_relation_triples(triples);

  static const char* const kAttributeNames[] = {"category", "description", "tag"};
  constexpr std::size_t kFillers = 20;
  std::vector<AttributeTriple> attributes;
  for (std::uint32_t h = 0; h < n; ++h) {
    const auto c = cluster_of[h];
    std::vector<std::size_t> names = {0, 1, 2};
    rng.shuffle(names);
    const auto count = 1 + rng.below(3);
    for (std::size_t a = 0; a < count; ++a) {
      std::vector<std::string> words;
      // One cluster keyword plus one shared filler word.
      words.push_back("group" + std::to_string(c));
      words.push_back("w" + std::to_string(rng.below(kFillers)));
      rng.shuffle(words);
      std::string literal;
      for (const auto& w : words) literal += (literal.empty() ? "" : " ") + w;
      const auto r = kg.intern_relation(kAttributeNames[names[a]]);
      attributes.push_back({{h}, r, kg.intern_value(literal)});
    }
  }
  kg.add_attribute_triples(attributes);

  for (std::uint32_t h = 0; h < n; ++h) {
    out.labels.push_back({{h}, {static_cast<std::uint32_t>(cluster_of[h])}});
  }
  out.split = split_dataset(kg, out.labels, out.classes, rng);
  return out;
}

}  // namespace kane
