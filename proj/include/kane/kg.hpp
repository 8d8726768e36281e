// SPDX-License-Identifier: Apache-2.0
//
// Knowledge graph storage: interned entities, relations, attribute values and
// words; relation triples (h, r, t) and attribute triples (h, r, "literal");
// per-entity outgoing neighborhoods; train/valid/test splits; and a seeded
// synthetic generator with planted cluster structure.
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kane/random.hpp"

namespace kane {

template <typename Tag>
struct Id {
  std::uint32_t v = 0;
  constexpr auto operator<=>(const Id&) const = default;
};

struct EntityTag {};
struct RelationTag {};
struct ValueTag {};
struct WordTag {};
struct ClassTag {};

using EntityId = Id<EntityTag>;
using RelationId = Id<RelationTag>;
using ValueId = Id<ValueTag>;
using WordId = Id<WordTag>;
using ClassId = Id<ClassTag>;

/// Bijection between surface strings and dense ids in first-seen order.
class Interner {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

struct RelationTriple {
  EntityId head;
  RelationId relation;
  EntityId tail;
  auto operator<=>(const RelationTriple&) const = default;
};

struct AttributeTriple {
  EntityId head;
  RelationId relation;
  ValueId value;
  auto operator<=>(const AttributeTriple&) const = default;
};

struct AttributeValue {
  std::string literal;
  std::vector<WordId> tokens;
};

/// Lowercases ASCII letters and splits on Unicode whitespace; punctuation
/// stays attached to its word.
std::vector<std::string> tokenize(std::string_view literal);

/// Throws ParseError when `text` is not valid UTF-8.
void validate_utf8(std::string_view text, std::string_view source, std::size_t line);

class KnowledgeGraph {
 public:
  EntityId intern_entity(std::string_view name) { return {entities_.intern(name)}; }
  RelationId intern_relation(std::string_view name);
  /// Interns the literal; identical literal strings share one id. Throws
  /// ContractError when the literal tokenizes to nothing.
  ValueId intern_value(std::string_view literal);

  /// Appends triples not already present. Returns how many were duplicates.
  std::size_t add_relation_triples(std::span<const RelationTriple> triples);
  std::size_t add_attribute_triples(std::span<const AttributeTriple> triples);

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  std::size_t value_count() const { return values_.size(); }
  std::size_t word_count() const { return words_.size(); }

  const Interner& entities() const { return entities_; }
  const Interner& relations() const { return relations_; }
  const Interner& words() const { return words_; }
  const AttributeValue& value(ValueId id) const { return values_.at(id.v); }
  const std::vector<AttributeValue>& values() const { return values_; }

  const std::vector<RelationTriple>& relation_triples() const { return relation_triples_; }
  const std::vector<AttributeTriple>& attribute_triples() const { return attribute_triples_; }

  /// True when the relation heads at least one attribute triple.
  bool is_attribute_relation(RelationId r) const { return attribute_relation_.at(r.v); }
  bool is_entity_relation(RelationId r) const { return entity_relation_.at(r.v); }
  std::size_t attribute_relation_count() const;
  std::size_t entity_relation_count() const;

  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

 private:
  Interner entities_;
  Interner relations_;
  Interner words_;
  Interner literals_;
  std::vector<AttributeValue> values_;
  std::vector<bool> attribute_relation_;
  std::vector<bool> entity_relation_;
  std::vector<RelationTriple> relation_triples_;
  std::vector<AttributeTriple> attribute_triples_;
  std::size_t duplicates_dropped_ = 0;
};

/// Parses `head<TAB>relation<TAB>tail` lines, interning names into `kg`.
/// Blank lines and `#` comments are skipped. Triples are returned in input
/// order and are not inserted into `kg`.
std::vector<RelationTriple> parse_relation_triples(std::string_view text, KnowledgeGraph& kg,
                                                   std::string_view source = "<relations>");

/// Parses `head<TAB>attribute<TAB>"literal"` lines. Surrounding double quotes
/// are stripped from the literal.
std::vector<AttributeTriple> parse_attribute_triples(std::string_view text, KnowledgeGraph& kg,
                                                     std::string_view source = "<attributes>");

struct Label {
  EntityId entity;
  ClassId cls;
};

/// Parses `entity<TAB>class_name` lines. Entities must already exist in `kg`.
std::vector<Label> parse_labels(std::string_view text, const KnowledgeGraph& kg,
                                Interner& classes, std::string_view source = "<labels>");

std::string serialize_relation_triples(const KnowledgeGraph& kg);
std::string serialize_attribute_triples(const KnowledgeGraph& kg);

struct Neighbor {
  enum class Kind : std::uint8_t { Entity, Value };
  RelationId relation;
  Kind kind;
  std::uint32_t index;  // EntityId or ValueId depending on kind
  auto operator<=>(const Neighbor&) const = default;
};

/// Outgoing neighborhoods N_h: every (r, t) from relation triples and every
/// (r, a) from attribute triples with head h.
class Neighborhood {
 public:
  Neighborhood() = default;
  explicit Neighborhood(std::vector<std::vector<Neighbor>> lists) : lists_(std::move(lists)) {}

  std::span<const Neighbor> of(EntityId h) const { return lists_.at(h.v); }
  std::size_t entity_count() const { return lists_.size(); }
  std::size_t total() const;

 private:
  std::vector<std::vector<Neighbor>> lists_;
};

/// Relation-triple neighbors precede attribute neighbors; each group keeps
/// the order of the supplied triples.
Neighborhood build_neighborhood(std::size_t entity_count,
                                std::span<const RelationTriple> relation_triples,
                                std::span<const AttributeTriple> attribute_triples);
Neighborhood build_neighborhood(const KnowledgeGraph& kg);

struct DatasetSplit {
  std::vector<RelationTriple> train;
  std::vector<RelationTriple> valid;
  std::vector<RelationTriple> test;

  Interner classes;
  /// Per-entity class, empty for unlabeled entities.
  std::vector<std::optional<ClassId>> labels;
  std::vector<EntityId> label_train;
  std::vector<EntityId> label_valid;
  std::vector<EntityId> label_test;

  std::size_t class_count() const { return classes.size(); }
};

struct SplitFractions {
  double valid = 0.1;
  double test = 0.1;
};

/// Shuffles relation triples into train/valid/test. A triple only leaves
/// train when its head, tail and relation keep at least one other train
/// occurrence, so every held-out entity and relation is seen in training.
/// Labeled entities are split with the same fractions.
DatasetSplit split_dataset(const KnowledgeGraph& kg, std::span<const Label> labels,
                           Interner classes, Rng& rng, SplitFractions fractions = {});

/// Throws ContractError naming the first broken split invariant.
void check_split(const KnowledgeGraph& kg, const DatasetSplit& split);

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t entities = 50;
  std::size_t relations = 5;
  std::size_t clusters = 5;
  std::size_t triples_per_entity = 8;
  /// Probability that a triple's tail ignores the planted cluster pattern.
  double noise = 0.05;
};

struct SyntheticDataset {
  KnowledgeGraph kg;
  std::vector<Label> labels;
  Interner classes;
  DatasetSplit split;
};

/// Clusters lie on a line; relation j moves a head in cluster c to a tail in
/// cluster c + shift(j). Each attribute literal holds its entity's cluster
/// keyword and one filler word shared across clusters. Labels are cluster indices.
SyntheticDataset generate_synthetic_kg(const SyntheticSpec& spec);

std::string serialize_labels(const KnowledgeGraph& kg, std::span<const Label> labels,
                             const Interner& classes);

}  // namespace kane
