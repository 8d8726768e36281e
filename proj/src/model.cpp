// SPDX-License-Identifier: Apache-2.0
#include "kane/model.hpp"

#include <cmath>
#include <string>

#include "kane/error.hpp"

namespace kane {

void ModelConfig::validate() const {
  if (dim < 1) throw ConfigError("dim must be >= 1");
  if (head_dim < 1) throw ConfigError("head_dim must be >= 1");
  if (heads < 1) throw ConfigError("heads must be >= 1");
  if (aggregator == Aggregator::Average && layers > 0 && head_dim != dim) {
    throw ConfigError("average aggregator requires head_dim == dim (got " +
                      std::to_string(head_dim) + " vs " + std::to_string(dim) + ")");
  }
  if (!std::isfinite(leaky_slope)) throw ConfigError("leaky_slope must be finite");
}

std::vector<ad::Parameter*> ModelParams::all() {
  std::vector<ad::Parameter*> out{&entities, &relations};
  if (words) out.push_back(&*words);
  if (lstm) {
    for (std::size_t g = 0; g < 4; ++g) {
      out.push_back(&lstm->input[g]);
      out.push_back(&lstm->hidden[g]);
      out.push_back(&lstm->bias[g]);
    }
  }
  for (auto& layer : layers) {
    for (auto& h : layer.heads) out.push_back(&h);
    if (layer.output) out.push_back(&*layer.output);
  }
  if (classifier_weight) out.push_back(&*classifier_weight);
  if (classifier_bias) out.push_back(&*classifier_bias);
  return out;
}

std::vector<const ad::Parameter*> ModelParams::all() const {
  auto mutable_list = const_cast<ModelParams*>(this)->all();
  return {mutable_list.begin(), mutable_list.end()};
}

namespace {

void fill_uniform(ad::Parameter& p, double bound, Rng& rng) {
  for (auto& x : p.value) x = rng.uniform(-bound, bound);
}

void normalize_rows(ad::Parameter& p) {
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto row = p.row(i);
    double s = 0.0;
    for (double x : row) s += x * x;
    const double n = std::sqrt(s);
    if (n > 0) {
      for (auto& x : row) x /= n;
    }
  }
}

double glorot(std::size_t fan_out, std::size_t fan_in) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

ModelParams init_params(const ModelConfig& config, const ModelSizes& sizes, Rng& rng) {
  config.validate();
  if (sizes.entities == 0 || sizes.relations == 0) {
    throw ConfigError("model needs at least one entity and one relation");
  }
  const auto k = config.dim;
  const double bound = 6.0 / std::sqrt(static_cast<double>(k));

  ModelParams p;
  p.entities = ad::Parameter("entity", ad::Shape{sizes.entities, k});
  fill_uniform(p.entities, bound, rng);
  normalize_rows(p.entities);
  p.relations = ad::Parameter("relation", ad::Shape{sizes.relations, k});
  fill_uniform(p.relations, bound, rng);
  normalize_rows(p.relations);

  if (config.use_attributes && sizes.words > 0) {
    p.words = ad::Parameter("word", ad::Shape{sizes.words, k});
    fill_uniform(*p.words, bound, rng);
    if (config.encoder == Encoder::Lstm) p.lstm = LstmParams::init(k, glorot(k, k), rng);
  }

  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerParams layer;
    for (std::size_t i = 0; i < config.heads; ++i) {
      ad::Parameter w("layer" + std::to_string(l) + ".head" + std::to_string(i),
                      ad::Shape{config.head_dim, k});
      fill_uniform(w, glorot(config.head_dim, k), rng);
      layer.heads.push_back(std::move(w));
    }
    if (config.aggregator == Aggregator::Concat) {
      const auto in = config.heads * config.head_dim;
      layer.output = ad::Parameter("layer" + std::to_string(l) + ".output", ad::Shape{k, in});
      fill_uniform(*layer.output, glorot(k, in), rng);
    }
    p.layers.push_back(std::move(layer));
  }

  if (sizes.classes > 0) {
    p.classifier_weight = ad::Parameter("classifier.weight", ad::Shape{sizes.classes, k});
    fill_uniform(*p.classifier_weight, glorot(sizes.classes, k), rng);
    p.classifier_bias = ad::Parameter("classifier.bias", ad::Shape{sizes.classes});
  }
  return p;
}

void check_params(const ModelParams& params, const ModelConfig& config, const ModelSizes& sizes) {
  auto expect = [](const ad::Parameter& p, const ad::Shape& s) {
    if (p.shape != s) {
      throw ShapeError("parameter " + p.name + " has shape " + p.shape.str() + ", expected " +
                       s.str());
    }
    if (p.value.size() != s.size()) throw ShapeError("parameter " + p.name + " has wrong length");
  };
  const auto k = config.dim;
  expect(params.entities, ad::Shape{sizes.entities, k});
  expect(params.relations, ad::Shape{sizes.relations, k});
  if (params.words) expect(*params.words, ad::Shape{sizes.words, k});
  if (params.lstm) {
    for (std::size_t g = 0; g < 4; ++g) {
      expect(params.lstm->input[g], ad::Shape{k, k});
      expect(params.lstm->hidden[g], ad::Shape{k, k});
      expect(params.lstm->bias[g], ad::Shape{k});
    }
  }
  if (params.layers.size() != config.layers) throw ShapeError("layer count differs from config");
  for (const auto& layer : params.layers) {
    if (layer.heads.size() != config.heads) throw ShapeError("head count differs from config");
    for (const auto& h : layer.heads) expect(h, ad::Shape{config.head_dim, k});
    if (config.aggregator == Aggregator::Concat) {
      if (!layer.output) throw ShapeError("concat aggregator needs an output transform");
      expect(*layer.output, ad::Shape{k, config.heads * config.head_dim});
    }
  }
  if (params.classifier_weight) expect(*params.classifier_weight, ad::Shape{sizes.classes, k});
  if (params.classifier_bias) expect(*params.classifier_bias, ad::Shape{sizes.classes});
}

ad::Var attention_logit(ad::Var transform, ad::Var relation, ad::Var neighbor, double slope) {
  auto wr = ad::matvec(transform, relation);
  auto message = ad::matvec(transform, ad::add(relation, neighbor));
  return ad::leaky_relu(ad::dot(wr, message), slope);
}

HeadResult attend(ad::Var transform, ad::Var head, std::span<const Message> messages,
                  const ModelConfig& config) {
  if (messages.empty()) throw ContractError("attention over an empty neighborhood");
  std::vector<ad::Var> logits;
  std::vector<ad::Var> transformed;
  logits.reserve(messages.size());
  transformed.reserve(messages.size());
  for (const auto& m : messages) {
    auto message = ad::matvec(transform, ad::add(m.relation, m.neighbor));
    transformed.push_back(message);
    if (config.attention == AttentionForm::Bilinear) {
      auto wr = m.relation_transformed.valid() ? m.relation_transformed
                                               : ad::matvec(transform, m.relation);
      logits.push_back(ad::leaky_relu(ad::dot(wr, message), config.leaky_slope));
    } else {
      auto gap = ad::sub(ad::add(head, m.relation), m.neighbor);
      auto d = config.norm == Norm::L1 ? ad::l1_norm(gap) : ad::l2_norm(gap);
      logits.push_back(ad::scale(d, -1.0));
    }
  }
  auto weights = ad::softmax(ad::concat(logits));
  return {weights, ad::weighted_sum(weights, transformed)};
}

ad::Var attention_weights(ad::Var transform, ad::Var head, std::span<const Message> messages,
                          const ModelConfig& config) {
  return attend(transform, head, messages, config).weights;
}

ad::Var propagate_head(ad::Var transform, ad::Var head, std::span<const Message> messages,
                       const ModelConfig& config) {
  return attend(transform, head, messages, config).output;
}

ad::Var aggregate(std::span<const ad::Var> head_outputs, Aggregator mode, ad::Var output_transform,
                  double slope) {
  if (head_outputs.empty()) throw ContractError("aggregate: no head outputs");
  if (mode == Aggregator::Concat) {
    return ad::leaky_relu(ad::matvec(output_transform, ad::concat(head_outputs)), slope);
  }
  auto mean = ad::scale(ad::sum(head_outputs), 1.0 / static_cast<double>(head_outputs.size()));
  return ad::leaky_relu(mean, slope);
}

ForwardPass forward_all(ad::Tape& tape, const Neighborhood& neighborhood,
                        std::span<const AttributeValue> values, ModelParams& params,
                        const ModelConfig& config) {
  config.validate();
  const auto n_entities = params.entities.rows();
  if (neighborhood.entity_count() != n_entities) {
    throw ShapeError("neighborhood covers " + std::to_string(neighborhood.entity_count()) +
                     " entities, embedding table has " + std::to_string(n_entities));
  }
  if (params.layers.size() != config.layers) throw ShapeError("layer count differs from config");

  ForwardPass pass;
  pass.entities.reserve(n_entities);
  for (std::size_t i = 0; i < n_entities; ++i) pass.entities.push_back(tape.row(params.entities, i));
  for (std::size_t r = 0; r < params.relations.rows(); ++r) {
    pass.relations.push_back(tape.row(params.relations, r));
  }
  if (config.use_attributes && !values.empty()) {
    if (!params.words) throw ContractError("attributes enabled but no word table");
    if (config.encoder == Encoder::Lstm) {
      if (!params.lstm) throw ContractError("LSTM encoder selected but no LSTM parameters");
      const auto lstm = LstmVars::bind(tape, *params.lstm);
      for (const auto& v : values) pass.values.push_back(lstm_encode(tape, v, *params.words, lstm));
    } else {
      for (const auto& v : values) pass.values.push_back(bow_encode(tape, v, *params.words));
    }
  }

  std::vector<Message> messages;
  for (std::size_t l = 0; l < config.layers; ++l) {
    auto& layer = params.layers[l];
    std::vector<ad::Var> transforms;
    for (auto& w : layer.heads) transforms.push_back(tape.parameter(w));
    ad::Var output;
    if (config.aggregator == Aggregator::Concat) output = tape.parameter(*layer.output);
    // W r is shared by every neighbor reached through r.
    std::vector<std::vector<ad::Var>> relation_cache(config.heads,
                                                     std::vector<ad::Var>(pass.relations.size()));

    std::vector<ad::Var> next(n_entities);
    std::vector<ad::Var> head_outputs(config.heads);
    for (std::size_t h = 0; h < n_entities; ++h) {
      messages.clear();
      for (const auto& nb : neighborhood.of(EntityId{static_cast<std::uint32_t>(h)})) {
        if (nb.kind == Neighbor::Kind::Value) {
          if (!config.use_attributes) continue;
          messages.push_back({pass.relations.at(nb.relation.v), pass.values.at(nb.index), {}});
        } else {
          messages.push_back({pass.relations.at(nb.relation.v), pass.entities.at(nb.index), {}});
        }
      }
      if (messages.empty()) {
        next[h] = pass.entities[h];
        continue;
      }
      const auto self = neighborhood.of(EntityId{static_cast<std::uint32_t>(h)});
      for (std::size_t i = 0; i < config.heads; ++i) {
        if (config.attention == AttentionForm::Bilinear) {
          std::size_t m = 0;
          for (const auto& nb : self) {
            if (nb.kind == Neighbor::Kind::Value && !config.use_attributes) continue;
            auto& cached = relation_cache[i][nb.relation.v];
            if (!cached.valid()) cached = ad::matvec(transforms[i], pass.relations[nb.relation.v]);
            messages[m++].relation_transformed = cached;
          }
        }
        head_outputs[i] = propagate_head(transforms[i], pass.entities[h], messages, config);
      }
      next[h] = aggregate(head_outputs, config.aggregator, output, config.leaky_slope);
    }
    pass.entities = std::move(next);
  }
  return pass;
}

ad::Var score(ad::Var head, ad::Var relation, ad::Var tail, Norm norm) {
  auto gap = ad::sub(ad::add(head, relation), tail);
  return norm == Norm::L1 ? ad::l1_norm(gap) : ad::l2_norm(gap);
}

double distance(std::span<const double> head, std::span<const double> relation,
                std::span<const double> tail, Norm norm) {
  double s = 0.0;
  if (norm == Norm::L1) {
    for (std::size_t i = 0; i < head.size(); ++i) s += std::abs(head[i] + relation[i] - tail[i]);
    return s;
  }
  for (std::size_t i = 0; i < head.size(); ++i) {
    const double d = head[i] + relation[i] - tail[i];
    s += d * d;
  }
  return std::sqrt(s);
}

ad::Var classify(ad::Var entity, ad::Var weight, ad::Var bias) {
  return ad::add(ad::matvec(weight, entity), bias);
}

std::vector<double> class_scores(std::span<const double> entity, const ad::Parameter& weight,
                                 const ad::Parameter& bias) {
  if (weight.cols() != entity.size()) {
    throw ShapeError("classifier expects dim " + std::to_string(weight.cols()) + ", got " +
                     std::to_string(entity.size()));
  }
  std::vector<double> out(weight.rows());
  for (std::size_t c = 0; c < weight.rows(); ++c) {
    auto row = weight.row(c);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * entity[j];
    out[c] = s + bias.value[c];
  }
  return out;
}

Embeddings compute_embeddings(const Neighborhood& neighborhood,
                              std::span<const AttributeValue> values, ModelParams& params,
                              const ModelConfig& config) {
  ad::Tape tape;
  auto pass = forward_all(tape, neighborhood, values, params, config);
  Embeddings e;
  e.dim = config.dim;
  for (const auto& v : pass.entities) {
    auto x = v.value();
    e.entities.insert(e.entities.end(), x.begin(), x.end());
  }
  for (const auto& v : pass.relations) {
    auto x = v.value();
    e.relations.insert(e.relations.end(), x.begin(), x.end());
  }
  for (const auto& v : pass.values) {
    auto x = v.value();
    e.values.insert(e.values.end(), x.begin(), x.end());
  }
  return e;
}

std::string to_string(Aggregator a) { return a == Aggregator::Concat ? "concat" : "average"; }
std::string to_string(Encoder e) { return e == Encoder::Bow ? "bow" : "lstm"; }
std::string to_string(Norm n) { return n == Norm::L1 ? "l1" : "l2"; }
std::string to_string(AttentionForm f) {
  return f == AttentionForm::Bilinear ? "bilinear" : "translational";
}

}  // namespace kane
