// SPDX-License-Identifier: Apache-2.0
#include "kane/evaluation.hpp"

#include "kane/error.hpp"

namespace kane {

std::size_t rank_entity(const Embeddings& emb, const RelationTriple& truth, Side side,
                        Setting setting, const FactSet& known, Norm norm) {
  const auto r = emb.relation(truth.relation.v);
  const double target = distance(emb.entity(truth.head.v), r, emb.entity(truth.tail.v), norm);
  std::size_t better = 0;
  for (std::uint32_t c = 0; c < emb.entity_count(); ++c) {
    RelationTriple candidate = truth;
    (side == Side::Head ? candidate.head : candidate.tail) = EntityId{c};
    if (candidate == truth) continue;
    if (setting == Setting::Filter && known.contains(candidate)) continue;
    const double d =
        distance(emb.entity(candidate.head.v), r, emb.entity(candidate.tail.v), norm);
    if (d < target) ++better;
  }
  return better + 1;
}

std::size_t rank_relation(const Embeddings& emb, const RelationTriple& truth,
                          std::span<const RelationId> candidates, Setting setting,
                          const FactSet& known, Norm norm) {
  const auto h = emb.entity(truth.head.v);
  const auto t = emb.entity(truth.tail.v);
  const double target = distance(h, emb.relation(truth.relation.v), t, norm);
  std::size_t better = 0;
  for (auto rel : candidates) {
    if (rel == truth.relation) continue;
    if (setting == Setting::Filter && known.contains(RelationTriple{truth.head, rel, truth.tail})) {
      continue;
    }
    if (distance(h, emb.relation(rel.v), t, norm) < target) ++better;
  }
  return better + 1;
}

Metrics aggregate_metrics(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw ContractError("aggregate_metrics: empty rank list");
  double sum = 0.0;
  std::size_t hits = 0;
  for (auto r : ranks) {
    sum += static_cast<double>(r);
    if (r <= k) ++hits;
  }
  const auto n = static_cast<double>(ranks.size());
  return {sum / n, static_cast<double>(hits) / n};
}

namespace {

RankingReport finish(RankingReport report) {
  const auto raw = aggregate_metrics(report.raw_ranks, report.k);
  const auto filtered = aggregate_metrics(report.filtered_ranks, report.k);
  report.mean_rank_raw = raw.mean_rank;
  report.hits_raw = raw.hits;
  report.mean_rank_filtered = filtered.mean_rank;
  report.hits_filtered = filtered.hits;
  return report;
}

}  // namespace

RankingReport evaluate_entities(const Embeddings& emb, std::span<const RelationTriple> triples,
                                const FactSet& known, Norm norm) {
  RankingReport report;
  report.task = RankingTask::EntityPrediction;
  report.k = 10;
  for (const auto& t : triples) {
    for (auto side : {Side::Head, Side::Tail}) {
      report.raw_ranks.push_back(rank_entity(emb, t, side, Setting::Raw, known, norm));
      report.filtered_ranks.push_back(rank_entity(emb, t, side, Setting::Filter, known, norm));
    }
  }
  return finish(std::move(report));
}

RankingReport evaluate_relations(const Embeddings& emb, std::span<const RelationTriple> triples,
                                 std::span<const RelationId> candidates, const FactSet& known,
                                 Norm norm) {
  RankingReport report;
  report.task = RankingTask::RelationPrediction;
  report.k = 1;
  for (const auto& t : triples) {
    report.raw_ranks.push_back(rank_relation(emb, t, candidates, Setting::Raw, known, norm));
    report.filtered_ranks.push_back(
        rank_relation(emb, t, candidates, Setting::Filter, known, norm));
  }
  return finish(std::move(report));
}

std::vector<RelationId> relation_candidates(const KnowledgeGraph& kg) {
  std::vector<RelationId> out;
  for (std::uint32_t r = 0; r < kg.relation_count(); ++r) {
    if (kg.is_entity_relation(RelationId{r})) out.push_back(RelationId{r});
  }
  return out;
}

std::size_t argmax(std::span<const double> scores) {
  if (scores.empty()) throw ContractError("argmax of an empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double classification_accuracy(const Embeddings& emb, const ModelParams& params,
                               std::span<const EntityId> entities,
                               std::span<const std::optional<ClassId>> labels) {
  if (entities.empty()) throw ContractError("classification_accuracy: no entities");
  if (!params.classifier_weight || !params.classifier_bias) {
    throw ContractError("classification_accuracy: model has no classifier head");
  }
  std::size_t correct = 0;
  for (auto e : entities) {
    const auto& label = labels[e.v];
    if (!label) throw ContractError("entity " + std::to_string(e.v) + " has no label");
    const auto scores = class_scores(emb.entity(e.v), *params.classifier_weight,
                                     *params.classifier_bias);
    if (argmax(scores) == label->v) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(entities.size());
}

std::string to_string(Setting s) { return s == Setting::Raw ? "raw" : "filter"; }
std::string to_string(RankingTask t) {
  return t == RankingTask::EntityPrediction ? "entity_prediction" : "relation_prediction";
}

}  // namespace kane
