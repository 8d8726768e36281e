// SPDX-License-Identifier: Apache-2.0
//
// Link-prediction ranking and classification accuracy over frozen
// embeddings. Ranks are optimistic: 1 + the number of candidates scoring
// strictly better than the answer. The filtered setting drops candidates
// that form another known positive triple.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kane/kg.hpp"
#include "kane/model.hpp"
#include "kane/training.hpp"

namespace kane {

enum class Setting { Raw, Filter };
enum class Side { Head, Tail };

/// Rank of the true head (Side::Head, query (?, r, t)) or tail among all entities.
std::size_t rank_entity(const Embeddings& emb, const RelationTriple& truth, Side side,
                        Setting setting, const FactSet& known, Norm norm);

/// Rank of the true relation among `candidates` for query (h, ?, t).
std::size_t rank_relation(const Embeddings& emb, const RelationTriple& truth,
                          std::span<const RelationId> candidates, Setting setting,
                          const FactSet& known, Norm norm);

struct Metrics {
  double mean_rank = 0.0;
  double hits = 0.0;
};

/// Mean rank and fraction of ranks <= k. Throws ContractError when empty.
Metrics aggregate_metrics(std::span<const std::size_t> ranks, std::size_t k);

enum class RankingTask { EntityPrediction, RelationPrediction };

struct RankingReport {
  RankingTask task = RankingTask::EntityPrediction;
  std::size_t k = 10;
  double mean_rank_raw = 0.0;
  double mean_rank_filtered = 0.0;
  double hits_raw = 0.0;
  double hits_filtered = 0.0;
  std::vector<std::size_t> raw_ranks;
  std::vector<std::size_t> filtered_ranks;
};

/// Head and tail queries for every triple, pooled. Hits@10.
RankingReport evaluate_entities(const Embeddings& emb, std::span<const RelationTriple> triples,
                                const FactSet& known, Norm norm);

/// Relation queries over every relation used by a relation triple. Hits@1.
RankingReport evaluate_relations(const Embeddings& emb, std::span<const RelationTriple> triples,
                                 std::span<const RelationId> candidates, const FactSet& known,
                                 Norm norm);

/// Relations that appear in at least one relation triple.
std::vector<RelationId> relation_candidates(const KnowledgeGraph& kg);

/// Index of the largest score; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores);

/// Fraction of `entities` whose argmax class score equals their label.
/// Throws ContractError on an empty set or an unlabeled entity.
double classification_accuracy(const Embeddings& emb, const ModelParams& params,
                               std::span<const EntityId> entities,
                               std::span<const std::optional<ClassId>> labels);

std::string to_string(Setting s);
std::string to_string(RankingTask t);

}  // namespace kane
