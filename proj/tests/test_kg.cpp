// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "kane/error.hpp"
#include "kane/kg.hpp"

using namespace kane;

TEST(Interner, AssignsDenseIdsInFirstSeenOrder) {
  Interner in;
  EXPECT_EQ(in.intern("b"), 0u);
  EXPECT_EQ(in.intern("a"), 1u);
  EXPECT_EQ(in.intern("b"), 0u);
  EXPECT_EQ(in.size(), 2u);
  EXPECT_EQ(in.name(1), "a");
  EXPECT_EQ(in.find("a"), 1u);
  EXPECT_FALSE(in.find("zz").has_value());
}

TEST(Interner, BijectionRoundTrip) {
  Interner in;
  Rng rng(5);
  for (int i = 0; i < 200; ++i) in.intern("n" + std::to_string(rng.below(80)));
  for (std::uint32_t id = 0; id < in.size(); ++id) EXPECT_EQ(in.find(in.name(id)), id);
}

TEST(ParseRelations, NamedEntitiesWithSpaces) {
  KnowledgeGraph kg;
  auto t = parse_relation_triples("Donald Trump\tFather of\tIvanka Trump", kg);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(kg.entity_count(), 2u);
  EXPECT_EQ(kg.relation_count(), 1u);
  EXPECT_EQ(kg.entities().name(t[0].head.v), "Donald Trump");
  EXPECT_EQ(kg.entities().name(t[0].tail.v), "Ivanka Trump");
  EXPECT_EQ(kg.relations().name(t[0].relation.v), "Father of");
}

TEST(ParseRelations, EmptyInputGivesNoTriples) {
  KnowledgeGraph kg;
  EXPECT_TRUE(parse_relation_triples("", kg).empty());
  EXPECT_EQ(kg.entity_count(), 0u);
}

TEST(ParseRelations, SharedNamesShareIds) {
  KnowledgeGraph kg;
  auto t = parse_relation_triples("a\tr\tb\nc\tr\ta", kg);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].relation, t[1].relation);
  EXPECT_EQ(t[0].head, t[1].tail);
  EXPECT_EQ(kg.entity_count(), 3u);
}

TEST(ParseRelations, SkipsCommentsBlankLinesAndCarriageReturns) {
  KnowledgeGraph kg;
  auto t = parse_relation_triples("# header\n\na\tr\tb\r\n   \n", kg);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(kg.entities().name(t[0].tail.v), "b");
}

TEST(ParseRelations, WrongFieldCountReportsLine) {
  KnowledgeGraph kg;
  try {
    parse_relation_triples("a\tr\tb\n# c\na\tr\n", kg, "rel.tsv");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("rel.tsv:3"), std::string::npos);
  }
  EXPECT_THROW(parse_relation_triples("a\tr\tb\tc", kg), ParseError);
}

TEST(ParseRelations, EmptyFieldIsRejected) {
  KnowledgeGraph kg;
  EXPECT_THROW(parse_relation_triples("a\t\tb", kg), ParseError);
}

TEST(ParseRelations, InvalidUtf8IsRejected) {
  KnowledgeGraph kg;
  EXPECT_THROW(parse_relation_triples("a\tr\t\xff\xfe", kg), ParseError);
  EXPECT_NO_THROW(parse_relation_triples("caf\xc3\xa9\tr\tb", kg));
}

TEST(ParseAttributes, QuotedLiteralIsTokenized) {
  KnowledgeGraph kg;
  auto t = parse_attribute_triples("Donald Trump\tBorn\t\"June 14, 1946\"", kg);
  ASSERT_EQ(t.size(), 1u);
  const auto& v = kg.value(t[0].value);
  EXPECT_EQ(v.literal, "June 14, 1946");
  ASSERT_EQ(v.tokens.size(), 3u);
  EXPECT_EQ(kg.words().name(v.tokens[0].v), "june");
  EXPECT_EQ(kg.words().name(v.tokens[1].v), "14,");
  EXPECT_EQ(kg.words().name(v.tokens[2].v), "1946");
}

TEST(ParseAttributes, IdenticalLiteralsShareValueId) {
  KnowledgeGraph kg;
  auto t = parse_attribute_triples("a\tx\t\"same words\"\nb\ty\tsame words", kg);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].value, t[1].value);
  EXPECT_EQ(kg.value_count(), 1u);
}

TEST(ParseAttributes, EmptyLiteralIsAnError) {
  KnowledgeGraph kg;
  EXPECT_THROW(parse_attribute_triples("e\tabstract\t\"\"", kg), ParseError);
  EXPECT_THROW(parse_attribute_triples("e\tabstract\t\"   \"", kg), ParseError);
}

TEST(Tokenize, LowercasesAndSplitsOnUnicodeSpace) {
  auto t = tokenize("Hello\xe2\x80\x83World  A.B");
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t[0], "hello");
  EXPECT_EQ(t[1], "world");
  EXPECT_EQ(t[2], "a.b");
  EXPECT_TRUE(tokenize(" \t ").empty());
  EXPECT_EQ(tokenize("\xc3\x89t\xc3\xa9")[0], "\xc3\x89t\xc3\xa9");
}

TEST(KnowledgeGraph, DuplicatesAreDroppedAndCounted) {
  KnowledgeGraph kg;
  auto t = parse_relation_triples("a\tr\tb\na\tr\tb\nb\tr\ta", kg);
  EXPECT_EQ(kg.add_relation_triples(t), 1u);
  EXPECT_EQ(kg.relation_triples().size(), 2u);
  EXPECT_EQ(kg.add_relation_triples(t), 3u);
  EXPECT_EQ(kg.duplicates_dropped(), 4u);
}

TEST(KnowledgeGraph, RelationKindsAreTagged) {
  KnowledgeGraph kg;
  kg.add_relation_triples(parse_relation_triples("a\tr\tb", kg));
  kg.add_attribute_triples(parse_attribute_triples("a\tname\t\"x\"", kg));
  EXPECT_EQ(kg.entity_relation_count(), 1u);
  EXPECT_EQ(kg.attribute_relation_count(), 1u);
  EXPECT_TRUE(kg.is_attribute_relation(RelationId{*kg.relations().find("name")}));
  EXPECT_FALSE(kg.is_entity_relation(RelationId{*kg.relations().find("name")}));
  EXPECT_TRUE(kg.is_entity_relation(RelationId{*kg.relations().find("r")}));
}

TEST(Neighborhood, MatchesDefinitionExample) {
  KnowledgeGraph kg;
  kg.add_relation_triples(parse_relation_triples("h\tr1\tt1", kg));
  kg.add_attribute_triples(parse_attribute_triples("h\tr2\t\"x\"", kg));
  auto nb = build_neighborhood(kg);
  auto list = nb.of(EntityId{0});
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].kind, Neighbor::Kind::Entity);
  EXPECT_EQ(list[0].index, 1u);
  EXPECT_EQ(list[1].kind, Neighbor::Kind::Value);
  EXPECT_EQ(list[1].index, 0u);
  EXPECT_TRUE(nb.of(EntityId{1}).empty());
}

TEST(Neighborhood, OnlyOutgoingEdges) {
  KnowledgeGraph kg;
  kg.add_relation_triples(parse_relation_triples("t1\tr1\th", kg));
  auto nb = build_neighborhood(kg);
  EXPECT_TRUE(nb.of(EntityId{*kg.entities().find("h")}).empty());
  EXPECT_EQ(nb.of(EntityId{*kg.entities().find("t1")}).size(), 1u);
}

TEST(Neighborhood, MatchesScanOracleOnRandomGraphs) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto kg = fixtures::random_kg(rng, 20, 4, 60, 25);
    auto nb = build_neighborhood(kg);
    std::size_t total = 0;
    for (std::uint32_t h = 0; h < kg.entity_count(); ++h) {
      std::multiset<Neighbor> expected;
      for (const auto& t : kg.relation_triples())
        if (t.head.v == h) expected.insert({t.relation, Neighbor::Kind::Entity, t.tail.v});
      for (const auto& t : kg.attribute_triples())
        if (t.head.v == h) expected.insert({t.relation, Neighbor::Kind::Value, t.value.v});
      auto got = nb.of(EntityId{h});
      EXPECT_EQ(std::multiset<Neighbor>(got.begin(), got.end()), expected);
      total += got.size();
    }
    EXPECT_EQ(total, kg.relation_triples().size() + kg.attribute_triples().size());
    EXPECT_EQ(nb.total(), total);
  }
}

TEST(Serialization, ParseOfSerializeReproducesGraph) {
  Rng rng(3);
  auto kg = fixtures::random_kg(rng, 15, 3, 40, 20);
  KnowledgeGraph back;
  back.add_relation_triples(parse_relation_triples(serialize_relation_triples(kg), back));
  back.add_attribute_triples(parse_attribute_triples(serialize_attribute_triples(kg), back));
  auto names = [](const KnowledgeGraph& g) {
    std::multiset<std::string> s;
    for (const auto& t : g.relation_triples())
      s.insert(g.entities().name(t.head.v) + "|" + g.relations().name(t.relation.v) + "|" +
               g.entities().name(t.tail.v));
    for (const auto& t : g.attribute_triples())
      s.insert(g.entities().name(t.head.v) + "|" + g.relations().name(t.relation.v) + "|\"" +
               g.value(t.value).literal);
    return s;
  };
  EXPECT_EQ(names(kg), names(back));
}

TEST(Labels, ParseAndValidate) {
  KnowledgeGraph kg;
  kg.add_relation_triples(parse_relation_triples("a\tr\tb", kg));
  Interner classes;
  auto labels = parse_labels("a\tx\nb\ty", kg, classes);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(classes.size(), 2u);
  Interner c2;
  EXPECT_THROW(parse_labels("zz\tx", kg, c2), ParseError);
  Interner c3;
  EXPECT_THROW(parse_labels("a\tx\na\ty", kg, c3), ParseError);
}

TEST(Split, DisjointAndCoveredOnGeneratedData) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticSpec spec;
    spec.seed = seed;
    auto d = generate_synthetic_kg(spec);
    EXPECT_NO_THROW(check_split(d.kg, d.split));
    std::set<RelationTriple> tr(d.split.train.begin(), d.split.train.end());
    std::set<std::uint32_t> ents, rels;
    for (const auto& t : d.split.train) {
      ents.insert(t.head.v);
      ents.insert(t.tail.v);
      rels.insert(t.relation.v);
    }
    for (const auto* part : {&d.split.valid, &d.split.test}) {
      for (const auto& t : *part) {
        EXPECT_FALSE(tr.count(t));
        EXPECT_TRUE(ents.count(t.head.v) && ents.count(t.tail.v) && rels.count(t.relation.v));
      }
    }
    std::set<RelationTriple> va(d.split.valid.begin(), d.split.valid.end());
    for (const auto& t : d.split.test) EXPECT_FALSE(va.count(t));
    EXPECT_EQ(d.split.train.size() + d.split.valid.size() + d.split.test.size(),
              d.kg.relation_triples().size());
  }
}

TEST(Synthetic, DeterministicForFixedSeed) {
  SyntheticSpec spec;
  auto a = generate_synthetic_kg(spec);
  auto b = generate_synthetic_kg(spec);
  EXPECT_EQ(serialize_relation_triples(a.kg), serialize_relation_triples(b.kg));
  EXPECT_EQ(serialize_attribute_triples(a.kg), serialize_attribute_triples(b.kg));
  EXPECT_EQ(serialize_labels(a.kg, a.labels, a.classes), serialize_labels(b.kg, b.labels, b.classes));
  EXPECT_EQ(a.split.test, b.split.test);
  spec.seed = 8;
  auto c = generate_synthetic_kg(spec);
  EXPECT_NE(serialize_relation_triples(a.kg), serialize_relation_triples(c.kg));
}

TEST(Synthetic, EveryEntityLabeledWithinClusterRange) {
  SyntheticSpec spec;
  auto d = generate_synthetic_kg(spec);
  EXPECT_EQ(d.kg.entity_count(), 50u);
  EXPECT_EQ(d.labels.size(), 50u);
  EXPECT_EQ(d.classes.size(), 5u);
  std::set<std::uint32_t> seen;
  for (const auto& l : d.labels) {
    EXPECT_LT(l.cls.v, 5u);
    seen.insert(l.entity.v);
  }
  EXPECT_EQ(seen.size(), 50u);
  EXPECT_EQ(d.kg.entity_relation_count(), 5u);
}

TEST(Synthetic, AttributesEncodeCluster) {
  SyntheticSpec spec;
  auto d = generate_synthetic_kg(spec);
  std::vector<std::size_t> count(d.kg.entity_count(), 0);
  for (const auto& t : d.kg.attribute_triples()) {
    ++count[t.head.v];
    const auto cls = d.labels[t.head.v].cls.v;
    const auto keyword = "group" + std::to_string(cls);
    bool found = false;
    for (auto w : d.kg.value(t.value).tokens) found |= d.kg.words().name(w.v) == keyword;
    EXPECT_TRUE(found) << d.kg.value(t.value).literal;
  }
  for (auto c : count) {
    EXPECT_GE(c, 1u);
    EXPECT_LE(c, 3u);
  }
}

TEST(Synthetic, RelationIdentityCorrelatesWithClusterPair) {
  SyntheticSpec spec;
  spec.noise = 0.0;
  auto d = generate_synthetic_kg(spec);
  // Without noise every relation maps clusters by a fixed offset.
  std::map<std::uint32_t, std::set<int>> offsets;
  for (const auto& t : d.kg.relation_triples()) {
    offsets[t.relation.v].insert(static_cast<int>(d.labels[t.tail.v].cls.v) -
                                 static_cast<int>(d.labels[t.head.v].cls.v));
  }
  for (const auto& [r, s] : offsets) EXPECT_EQ(s.size(), 1u) << "relation " << r;
}

TEST(Synthetic, BadParametersAreConfigErrors) {
  SyntheticSpec spec;
  spec.clusters = 1;
  EXPECT_THROW(generate_synthetic_kg(spec), ConfigError);
  spec = {};
  spec.entities = 3;
  spec.clusters = 4;
  EXPECT_THROW(generate_synthetic_kg(spec), ConfigError);
  spec = {};
  spec.noise = 1.5;
  EXPECT_THROW(generate_synthetic_kg(spec), ConfigError);
}
