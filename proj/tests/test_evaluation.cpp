// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kane/error.hpp"
#include "kane/evaluation.hpp"
#include "oracle.hpp"

using namespace kane;

namespace {

RelationTriple triple(std::uint32_t h, std::uint32_t r, std::uint32_t t) {
  return {EntityId{h}, RelationId{r}, EntityId{t}};
}

// Four entities on a line at 0, 1, 2, 3 and one relation that adds 1.
Embeddings line() {
  Embeddings e;
  e.dim = 1;
  e.entities = {0, 1, 2, 3};
  e.relations = {1};
  return e;
}

Embeddings random_embeddings(Rng& rng, std::size_t entities, std::size_t relations, std::size_t dim) {
  Embeddings e;
  e.dim = dim;
  for (std::size_t i = 0; i < entities * dim; ++i) e.entities.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < relations * dim; ++i) e.relations.push_back(rng.uniform(-1, 1));
  return e;
}

oracle::Mat rows(const std::vector<double>& flat, std::size_t dim) {
  oracle::Mat m;
  for (std::size_t i = 0; i < flat.size(); i += dim) m.emplace_back(flat.begin() + i, flat.begin() + i + dim);
  return m;
}

}  // namespace

TEST(Rank, ExactAnswerRanksFirst) {
  FactSet none;
  EXPECT_EQ(rank_entity(line(), triple(0, 0, 1), Side::Tail, Setting::Raw, none, Norm::L1), 1u);
}

TEST(Rank, CountsStrictlyBetterCandidates) {
  FactSet none;
  EXPECT_EQ(rank_entity(line(), triple(0, 0, 3), Side::Tail, Setting::Raw, none, Norm::L1), 4u);
  // tie at distance 1 with candidate 0 does not count against the answer
  EXPECT_EQ(rank_entity(line(), triple(0, 0, 2), Side::Tail, Setting::Raw, none, Norm::L1), 2u);
}

TEST(Rank, FilterDropsOtherKnownAnswers) {
  FactSet known;
  known.insert(triple(0, 0, 1));
  EXPECT_EQ(rank_entity(line(), triple(0, 0, 3), Side::Tail, Setting::Filter, known, Norm::L1), 3u);
  EXPECT_EQ(rank_entity(line(), triple(0, 0, 3), Side::Tail, Setting::Raw, known, Norm::L1), 4u);
}

TEST(Rank, HeadSide) {
  FactSet none;
  // query (?, r, 3): head 2 is exact, 1 and 3 are at distance 1
  EXPECT_EQ(rank_entity(line(), triple(0, 0, 3), Side::Head, Setting::Raw, none, Norm::L1), 4u);
  EXPECT_EQ(rank_entity(line(), triple(2, 0, 3), Side::Head, Setting::Raw, none, Norm::L1), 1u);
}

TEST(Rank, RelationCandidates) {
  Embeddings e = line();
  e.relations = {1, 2, 3};
  FactSet none;
  std::vector<RelationId> cands{RelationId{0}, RelationId{1}, RelationId{2}};
  EXPECT_EQ(rank_relation(e, triple(0, 1, 2), cands, Setting::Raw, none, Norm::L1), 1u);
  EXPECT_EQ(rank_relation(e, triple(0, 2, 1), cands, Setting::Raw, none, Norm::L1), 3u);
  FactSet known;
  known.insert(triple(0, 0, 1));
  EXPECT_EQ(rank_relation(e, triple(0, 2, 1), cands, Setting::Filter, known, Norm::L1), 2u);
}

TEST(Rank, MatchesReferenceOnRandomGraphs) {
  Rng rng(41);
  for (int g = 0; g < 10; ++g) {
    auto kg = fixtures::random_kg(rng, 12, 4, 40, 0, 4, 0);
    const auto emb = random_embeddings(rng, kg.entity_count(), kg.relation_count(), 3);
    const auto ent = rows(emb.entities, 3), rel = rows(emb.relations, 3);
    const auto known = known_facts(kg);
    const auto oknown = fixtures::known_of(kg);
    const auto cands = relation_candidates(kg);
    std::vector<std::uint32_t> ocands;
    for (auto r : cands) ocands.push_back(r.v);
    for (const auto& t : kg.relation_triples()) {
      const oracle::RelTriple ot{t.head.v, t.relation.v, t.tail.v};
      for (auto norm : {Norm::L1, Norm::L2}) {
        const bool l1 = norm == Norm::L1;
        for (auto setting : {Setting::Raw, Setting::Filter}) {
          const bool f = setting == Setting::Filter;
          EXPECT_EQ(rank_entity(emb, t, Side::Head, setting, known, norm),
                    oracle::rank_entity(ent, rel, ot, true, f, oknown, l1));
          EXPECT_EQ(rank_entity(emb, t, Side::Tail, setting, known, norm),
                    oracle::rank_entity(ent, rel, ot, false, f, oknown, l1));
          EXPECT_EQ(rank_relation(emb, t, cands, setting, known, norm),
                    oracle::rank_relation(ent, rel, ot, ocands, f, oknown, l1));
        }
      }
    }
  }
}

TEST(Rank, FilteredNeverWorseThanRaw) {
  Rng rng(43);
  auto kg = fixtures::random_kg(rng, 15, 3, 60, 0, 4, 0);
  const auto emb = random_embeddings(rng, kg.entity_count(), kg.relation_count(), 4);
  const auto known = known_facts(kg);
  const auto rep = evaluate_entities(emb, kg.relation_triples(), known, Norm::L1);
  ASSERT_EQ(rep.raw_ranks.size(), 2 * kg.relation_triples().size());
  for (std::size_t i = 0; i < rep.raw_ranks.size(); ++i) EXPECT_LE(rep.filtered_ranks[i], rep.raw_ranks[i]);
  EXPECT_LE(rep.mean_rank_filtered, rep.mean_rank_raw);
  EXPECT_GE(rep.hits_filtered, rep.hits_raw);
}

TEST(Rank, InvariantUnderPositiveScaling) {
  Rng rng(44);
  auto kg = fixtures::random_kg(rng, 10, 3, 30, 0, 4, 0);
  auto emb = random_embeddings(rng, kg.entity_count(), kg.relation_count(), 3);
  const auto known = known_facts(kg);
  const auto before = evaluate_entities(emb, kg.relation_triples(), known, Norm::L2);
  for (auto& x : emb.entities) x *= 3.5;
  for (auto& x : emb.relations) x *= 3.5;
  const auto after = evaluate_entities(emb, kg.relation_triples(), known, Norm::L2);
  EXPECT_EQ(before.raw_ranks, after.raw_ranks);
  EXPECT_EQ(before.filtered_ranks, after.filtered_ranks);
}

TEST(Metrics, MeanRankAndHits) {
  const std::vector<std::size_t> ranks{1, 3, 11};
  const auto m = aggregate_metrics(ranks, 10);
  EXPECT_DOUBLE_EQ(m.mean_rank, 5.0);
  EXPECT_DOUBLE_EQ(m.hits, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(aggregate_metrics(ranks, 1).hits, 1.0 / 3.0);
  const std::vector<std::size_t> none;
  EXPECT_THROW(aggregate_metrics(none, 10), ContractError);
}

TEST(Metrics, RelationReportUsesHitsAtOne) {
  Embeddings e = line();
  e.relations = {1, 2};
  FactSet none;
  std::vector<RelationId> cands{RelationId{0}, RelationId{1}};
  std::vector<RelationTriple> ts{triple(0, 0, 1), triple(0, 0, 2)};
  const auto rep = evaluate_relations(e, ts, cands, none, Norm::L1);
  EXPECT_EQ(rep.k, 1u);
  EXPECT_EQ(rep.raw_ranks, (std::vector<std::size_t>{1, 2}));
  EXPECT_DOUBLE_EQ(rep.hits_raw, 0.5);
}

TEST(Argmax, TiesGoToLowestIndex) {
  const std::vector<double> s{1, 3, 3, 2};
  EXPECT_EQ(argmax(s), 1u);
  const std::vector<double> z{0, 0};
  EXPECT_EQ(argmax(z), 0u);
}

TEST(Accuracy, ZeroClassifierPredictsClassZero) {
  Embeddings e = line();
  ModelParams p;
  p.classifier_weight = ad::Parameter("w", ad::Shape{3, 1});
  p.classifier_bias = ad::Parameter("b", ad::Shape{3});
  std::vector<std::optional<ClassId>> labels{ClassId{0}, ClassId{1}, ClassId{0}, ClassId{2}};
  std::vector<EntityId> all{EntityId{0}, EntityId{1}, EntityId{2}, EntityId{3}};
  EXPECT_DOUBLE_EQ(classification_accuracy(e, p, all, labels), 0.5);
}

TEST(Accuracy, PerfectAndErrors) {
  Embeddings e = line();
  ModelParams p;
  // class 1 wins for x > 1.5
  p.classifier_weight = ad::Parameter("w", ad::Shape{2, 1}, {0, 1});
  p.classifier_bias = ad::Parameter("b", ad::Shape{2}, {1.5, 0});
  std::vector<std::optional<ClassId>> labels{ClassId{0}, ClassId{0}, ClassId{1}, ClassId{1}};
  std::vector<EntityId> all{EntityId{0}, EntityId{1}, EntityId{2}, EntityId{3}};
  EXPECT_DOUBLE_EQ(classification_accuracy(e, p, all, labels), 1.0);
  std::vector<EntityId> none;
  EXPECT_THROW(classification_accuracy(e, p, none, labels), ContractError);
  labels[2].reset();
  EXPECT_THROW(classification_accuracy(e, p, all, labels), ContractError);
}

TEST(Candidates, OnlyRelationsWithEntityTails) {
  Rng rng(1);
  auto kg = fixtures::random_kg(rng, 5, 2, 10, 4);
  const auto c = relation_candidates(kg);
  for (auto r : c) EXPECT_TRUE(kg.is_entity_relation(r));
  EXPECT_EQ(c.size(), kg.entity_relation_count());
}
