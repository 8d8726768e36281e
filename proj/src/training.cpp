// SPDX-License-Identifier: Apache-2.0
#include "kane/training.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "kane/error.hpp"
#include "kane/evaluation.hpp"

namespace kane {

void TrainConfig::validate() const {
  model.validate();
  if (!(margin > 0)) throw ConfigError("margin must be > 0");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (task == Task::Completion && negatives < 1) throw ConfigError("negatives must be >= 1");
  if (validate_every < 1) throw ConfigError("validate_every must be >= 1");
}

std::size_t FactHash::operator()(const Fact& f) const {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint64_t x : {std::uint64_t{f.head.v}, std::uint64_t{f.relation.v},
                          std::uint64_t{f.tail}, std::uint64_t{f.attribute}}) {
    h ^= x + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return static_cast<std::size_t>(h);
}

FactSet known_facts(const KnowledgeGraph& kg) {
  FactSet set;
  for (const auto& t : kg.relation_triples()) set.insert(t);
  for (const auto& t : kg.attribute_triples()) set.insert(t);
  return set;
}

std::vector<Fact> corrupt(const Fact& positive, const CorruptionSpace& space, const FactSet* known,
                          Rng& rng, std::size_t n) {
  if (space.entities < 2) throw SamplingError("cannot corrupt triples of a single-entity graph");
  constexpr std::size_t kMaxAttempts = 1000;
  std::vector<Fact> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t attempts = 0;
    while (true) {
      if (++attempts > kMaxAttempts) {
        throw SamplingError("no valid corruption found after " + std::to_string(kMaxAttempts) +
                            " draws");
      }
      Fact neg = positive;
      if (rng.below(2) == 0) {
        neg.head = EntityId{static_cast<std::uint32_t>(rng.below(space.entities))};
      } else {
        const auto pool = positive.attribute ? space.values : space.entities;
        neg.tail = static_cast<std::uint32_t>(rng.below(pool));
      }
      if (neg == positive) continue;
      if (known && known->contains(neg)) continue;
      out.push_back(neg);
      break;
    }
  }
  return out;
}

ad::Var hinge_loss(std::span<const ScoredPair> pairs, double margin) {
  if (pairs.empty()) throw ContractError("hinge_loss: no positive/negative pairs");
  std::vector<ad::Var> terms;
  terms.reserve(pairs.size());
  auto& tape = *pairs[0].positive.tape();
  auto gamma = tape.scalar(margin);
  for (const auto& p : pairs) {
    terms.push_back(ad::leaky_relu(ad::sub(ad::add(gamma, p.positive), p.negative), 0.0));
  }
  return ad::sum(terms);
}

ad::Var bce_loss(std::span<const ad::Var> scores, std::span<const std::optional<ClassId>> labels,
                 std::size_t class_count) {
  if (scores.empty()) throw ContractError("bce_loss: no labeled entities");
  if (scores.size() != labels.size()) throw ContractError("bce_loss: scores and labels differ in length");
  auto& tape = *scores[0].tape();
  std::vector<ad::Var> terms;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (!labels[e]) throw ContractError("bce_loss: entity without a label");
    if (labels[e]->v >= class_count) throw ContractError("bce_loss: label outside class range");
    if (scores[e].shape() != ad::Shape{class_count}) {
      throw ShapeError("bce_loss: scores of shape " + scores[e].shape().str() + " for " +
                       std::to_string(class_count) + " classes");
    }
    std::vector<double> y(class_count, 0.0), not_y(class_count, 1.0);
    y[labels[e]->v] = 1.0;
    not_y[labels[e]->v] = 0.0;
    auto pos = ad::dot(tape.constant(std::move(y)), ad::log_sigmoid(scores[e]));
    auto neg = ad::dot(tape.constant(std::move(not_y)), ad::log_sigmoid(ad::scale(scores[e], -1.0)));
    terms.push_back(ad::add(pos, neg));
  }
  return ad::scale(ad::sum(terms), -1.0 / static_cast<double>(scores.size()));
}

void sgd_step(std::span<ad::Parameter* const> params, double learning_rate,
              const StepContext& context) {
  for (const auto* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      if (!std::isfinite(p->grad[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient " << p->grad[i] << " in parameter " << p->name << " at index "
            << i << " (epoch " << context.epoch << ", batch " << context.batch << ")";
        throw NumericError(msg.str());
      }
    }
  }
  for (auto* p : params) {
    if (p->grad.size() != p->value.size()) {
      p->zero_grad();
      continue;
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= learning_rate * p->grad[i];
    std::fill(p->grad.begin(), p->grad.end(), 0.0);
  }
}

ModelSizes model_sizes(const KnowledgeGraph& kg, const DatasetSplit& split,
                       const ModelConfig& config) {
  ModelSizes s;
  s.entities = kg.entity_count();
  s.relations = kg.relation_count();
  s.words = config.use_attributes ? kg.word_count() : 0;
  s.classes = split.class_count();
  return s;
}

Neighborhood training_neighborhood(const KnowledgeGraph& kg, const DatasetSplit& split,
                                   const ModelConfig& config) {
  if (config.use_attributes) {
    return build_neighborhood(kg.entity_count(), split.train, kg.attribute_triples());
  }
  return build_neighborhood(kg.entity_count(), split.train, {});
}

ad::Var completion_batch_loss(const ForwardPass& pass, std::span<const Fact> positives,
                              std::span<const std::vector<Fact>> negatives, double margin,
                              Norm norm) {
  auto tail_of = [&](const Fact& f) {
    return f.attribute ? pass.values.at(f.tail) : pass.entities.at(f.tail);
  };
  std::vector<ScoredPair> pairs;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& p = positives[i];
    const auto r = pass.relations.at(p.relation.v);
    auto d_pos = score(pass.entities.at(p.head.v), r, tail_of(p), norm);
    for (const auto& n : negatives[i]) {
      pairs.push_back({d_pos, score(pass.entities.at(n.head.v), r, tail_of(n), norm)});
    }
  }
  return hinge_loss(pairs, margin);
}

namespace {

void renormalize_entities(ModelParams& params) {
  for (std::size_t i = 0; i < params.entities.rows(); ++i) {
    auto row = params.entities.row(i);
    double s = 0.0;
    for (double x : row) s += x * x;
    const double n = std::sqrt(s);
    if (n > 0) {
      for (auto& x : row) x /= n;
    }
  }
}

void check_finite(const ModelParams& params, std::size_t epoch) {
  for (const auto* p : params.all()) {
    for (double x : p->value) {
      if (!std::isfinite(x)) {
        throw NumericError("parameter " + p->name + " became non-finite in epoch " +
                           std::to_string(epoch));
      }
    }
  }
}

}  // namespace

TrainResult train(const KnowledgeGraph& kg, const DatasetSplit& split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  Rng rng(config.seed);
  const auto& mc = config.model;
  TrainResult result{init_params(mc, model_sizes(kg, split, mc), rng), {}, {}};
  auto& params = result.params;
  auto& report = result.report;

  const auto neighborhood = training_neighborhood(kg, split, mc);
  const auto& values = kg.values();
  const FactSet known = known_facts(kg);
  const CorruptionSpace space{kg.entity_count(), kg.value_count()};

  std::vector<Fact> facts;
  std::vector<EntityId> labeled;
  if (config.task == Task::Completion) {
    for (const auto& t : split.train) facts.push_back({t.head, t.relation, t.tail.v, false});
    if (mc.use_attributes) {
      for (const auto& t : kg.attribute_triples()) facts.push_back({t.head, t.relation, t.value.v, true});
    }
    if (config.epochs > 0 && facts.empty()) throw ConfigError("no training triples");
  } else {
    if (!params.classifier_weight) throw ConfigError("classification needs labeled entities");
    labeled = split.label_train;
    if (config.epochs > 0 && labeled.empty()) throw ConfigError("no labeled training entities");
  }

  auto validate_now = [&]() -> std::optional<double> {
    const auto emb = compute_embeddings(neighborhood, values, params, mc);
    if (config.task == Task::Completion) {
      if (split.valid.empty()) return std::nullopt;
      return evaluate_entities(emb, split.valid, known, mc.norm).hits_filtered;
    }
    if (split.label_valid.empty()) return std::nullopt;
    return classification_accuracy(emb, params, split.label_valid, split.labels);
  };

  auto all_params = params.all();
  ModelParams best;
  bool have_best = false;
  std::size_t checks_since_best = 0;
  ad::Tape tape;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    std::size_t batches = 0;
    const std::size_t n_items = config.task == Task::Completion ? facts.size() : labeled.size();
    if (config.task == Task::Completion) {
      rng.shuffle(facts);
    } else {
      rng.shuffle(labeled);
    }
    for (std::size_t begin = 0; begin < n_items; begin += config.batch_size) {
      const auto end = std::min(n_items, begin + config.batch_size);
      tape.clear();
      auto pass = forward_all(tape, neighborhood, values, params, mc);
      ad::Var loss;
      if (config.task == Task::Completion) {
        std::span<const Fact> batch(facts.data() + begin, end - begin);
        std::vector<std::vector<Fact>> negatives;
        negatives.reserve(batch.size());
        for (const auto& f : batch) {
          negatives.push_back(corrupt(f, space, config.filter_negatives ? &known : nullptr, rng,
                                      config.negatives));
        }
        loss = completion_batch_loss(pass, batch, negatives, config.margin, mc.norm);
        if (config.mean_reduction) {
          loss = ad::scale(loss, 1.0 / static_cast<double>(batch.size()));
        }
      } else {
        auto w = tape.parameter(*params.classifier_weight);
        auto b = tape.parameter(*params.classifier_bias);
        std::vector<ad::Var> scores;
        std::vector<std::optional<ClassId>> labels;
        for (std::size_t i = begin; i < end; ++i) {
          scores.push_back(classify(pass.entities[labeled[i].v], w, b));
          labels.push_back(split.labels[labeled[i].v]);
        }
        loss = bce_loss(scores, labels, split.class_count());
      }
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1));
      }
      for (auto* p : all_params) p->zero_grad();
      tape.backward(loss);
      sgd_step(all_params, config.learning_rate, {epoch, batches + 1});
      loss_sum += value;
      ++batches;
    }
    tape.clear();
    if (config.renormalize) renormalize_entities(params);
    check_finite(params, epoch);

    EpochRecord record;
    record.epoch = epoch;
    record.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    if (epoch % config.validate_every == 0) {
      record.validation = validate_now();
      if (record.validation) {
        if (!report.best_validation || *record.validation > *report.best_validation) {
          report.best_validation = record.validation;
          report.best_epoch = epoch;
          best = params;
          have_best = true;
          checks_since_best = 0;
        } else {
          ++checks_since_best;
        }
      }
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    if (config.patience > 0 && checks_since_best >= config.patience) {
      report.early_stopped = true;
      break;
    }
  }

  if (have_best) {
    params = std::move(best);
  } else {
    report.best_epoch = report.epochs.size();
  }
  result.rng_state = rng.state();
  return result;
}

std::string to_string(Task t) { return t == Task::Completion ? "completion" : "classification"; }

}  // namespace kane
