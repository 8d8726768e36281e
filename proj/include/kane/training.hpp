// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "kane/autodiff.hpp"
#include "kane/kg.hpp"
#include "kane/model.hpp"
#include "kane/random.hpp"

namespace kane {

enum class Task { Completion, Classification };

struct TrainConfig {
  ModelConfig model;
  double margin = 1.0;          // gamma
  double learning_rate = 0.01;  // lambda
  std::size_t batch_size = 32;
  std::size_t negatives = 10;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;
  Task task = Task::Completion;
  std::size_t validate_every = 5;
  std::size_t patience = 20;  // validation checks without improvement; 0 disables
  bool renormalize = false;
  bool filter_negatives = true;
  /// Divide the summed hinge loss by the number of positives in the batch.
  bool mean_reduction = true;

  void validate() const;
};

/// A training fact: a relation triple, or an attribute triple whose tail is a value.
struct Fact {
  EntityId head;
  RelationId relation;
  std::uint32_t tail = 0;
  bool attribute = false;
  auto operator<=>(const Fact&) const = default;
};

struct FactHash {
  std::size_t operator()(const Fact& f) const;
};

/// Membership set over relation and attribute triples.
class FactSet {
 public:
  void insert(const Fact& f) { facts_.insert(f); }
  void insert(const RelationTriple& t) { insert(Fact{t.head, t.relation, t.tail.v, false}); }
  void insert(const AttributeTriple& t) { insert(Fact{t.head, t.relation, t.value.v, true}); }
  bool contains(const Fact& f) const { return facts_.count(f) > 0; }
  bool contains(const RelationTriple& t) const {
    return contains(Fact{t.head, t.relation, t.tail.v, false});
  }
  std::size_t size() const { return facts_.size(); }

 private:
  std::unordered_set<Fact, FactHash> facts_;
};

/// Every known positive: train, valid and test relation triples plus all
/// attribute triples.
FactSet known_facts(const KnowledgeGraph& kg);

struct CorruptionSpace {
  std::size_t entities = 0;
  std::size_t values = 0;
};

/// Draws `n` negatives by replacing head or tail (chosen uniformly) with a
/// uniform entity, or a uniform attribute value for attribute tails.
/// Negatives never equal the positive and, when `known` is given, never hit
/// a known fact. Throws SamplingError when no valid corruption exists.
std::vector<Fact> corrupt(const Fact& positive, const CorruptionSpace& space, const FactSet* known,
                          Rng& rng, std::size_t n);

struct ScoredPair {
  ad::Var positive;  // d(h + r, e)
  ad::Var negative;  // d(h' + r, e')
};

/// sum over pairs of [margin + d(pos) - d(neg)]_+
ad::Var hinge_loss(std::span<const ScoredPair> pairs, double margin);

/// Mean binary cross-entropy over entities of sigmoid class scores against
/// one-hot labels. Throws ContractError for an unlabeled entity.
ad::Var bce_loss(std::span<const ad::Var> scores, std::span<const std::optional<ClassId>> labels,
                 std::size_t class_count);

struct StepContext {
  std::size_t epoch = 0;
  std::size_t batch = 0;
};

/// p -= lr * grad for every parameter, then clears gradients. Throws
/// NumericError before touching anything if a gradient is not finite.
void sgd_step(std::span<ad::Parameter* const> params, double learning_rate,
              const StepContext& context = {});

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean batch loss
  double seconds = 0.0;
  std::optional<double> validation;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // epoch whose parameters were kept
  std::optional<double> best_validation;
  bool early_stopped = false;
};

ModelSizes model_sizes(const KnowledgeGraph& kg, const DatasetSplit& split,
                       const ModelConfig& config);

/// Neighborhoods built from the train relation triples plus, when
/// attributes are on, every attribute triple.
Neighborhood training_neighborhood(const KnowledgeGraph& kg, const DatasetSplit& split,
                                   const ModelConfig& config);

struct TrainResult {
  ModelParams params;
  TrainReport report;
  std::string rng_state;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD with seeded shuffling and negative sampling, periodic
/// validation and patience-based early stopping. Returns the parameters of
/// the best validation check (the final ones when no check ran).
TrainResult train(const KnowledgeGraph& kg, const DatasetSplit& split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

/// Loss of one completion batch; exposed for reference comparisons.
ad::Var completion_batch_loss(const ForwardPass& pass, std::span<const Fact> positives,
                              std::span<const std::vector<Fact>> negatives, double margin,
                              Norm norm);

std::string to_string(Task t);

}  // namespace kane
