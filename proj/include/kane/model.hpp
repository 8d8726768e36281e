// SPDX-License-Identifier: Apache-2.0
//
// The KANE network. Each propagation layer runs `heads` independent
// attention heads over every entity's outgoing neighborhood (relation tails
// and encoded attribute values) and merges them with a concatenation or
// averaging aggregator. Triples are scored translationally as
// ||h + r - t|| on the final-layer entity vectors.
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kane/autodiff.hpp"
#include "kane/encoders.hpp"
#include "kane/kg.hpp"
#include "kane/random.hpp"

namespace kane {

enum class Aggregator { Concat, Average };
enum class Encoder { Bow, Lstm };
enum class Norm { L1, L2 };
/// `Bilinear` scores neighbors as LeakyReLU((W r)^T W (r + n)); `Translational`
/// uses -||h + r - n||.
enum class AttentionForm { Bilinear, Translational };

struct ModelConfig {
  std::size_t dim = 64;       // k
  std::size_t head_dim = 64;  // k'
  std::size_t heads = 2;      // m
  std::size_t layers = 2;     // L
  Aggregator aggregator = Aggregator::Average;
  Encoder encoder = Encoder::Bow;
  double leaky_slope = 0.2;
  Norm norm = Norm::L1;
  AttentionForm attention = AttentionForm::Bilinear;
  bool use_attributes = true;

  /// Throws ConfigError.
  void validate() const;
  /// No propagation and no attributes: plain TransE on raw embeddings.
  bool transe_mode() const { return layers == 0 && !use_attributes; }
};

struct LayerParams {
  std::vector<ad::Parameter> heads;   // k' x k each
  std::optional<ad::Parameter> output;  // k x (m k'), concat aggregator only
};

struct ModelSizes {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t words = 0;
  std::size_t classes = 0;
};

struct ModelParams {
  ad::Parameter entities;   // |E| x k
  ad::Parameter relations;  // |R| x k
  std::optional<ad::Parameter> words;  // |V| x k
  std::optional<LstmParams> lstm;
  std::vector<LayerParams> layers;
  std::optional<ad::Parameter> classifier_weight;  // C x k
  std::optional<ad::Parameter> classifier_bias;    // C

  /// Every parameter in a fixed order (checkpoint order).
  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;
};

/// Embeddings uniform in [-6/sqrt(k), 6/sqrt(k)] with entity and relation rows
/// L2-normalized; transforms Glorot-uniform; classifier bias zero.
ModelParams init_params(const ModelConfig& config, const ModelSizes& sizes, Rng& rng);

/// Checks that every shape agrees with `config` and `sizes`; throws ShapeError.
void check_params(const ModelParams& params, const ModelConfig& config, const ModelSizes& sizes);

/// Inputs of one head at one entity: a neighbor reached through a relation.
struct Message {
  ad::Var relation;
  ad::Var neighbor;
  /// W r for the head's transform; computed on demand when unset.
  ad::Var relation_transformed;
};

/// LeakyReLU((W r)^T W (r + n)).
ad::Var attention_logit(ad::Var transform, ad::Var relation, ad::Var neighbor, double slope);

struct HeadResult {
  ad::Var weights;  // softmax over the neighborhood, in message order
  ad::Var output;   // sum_n weight_n * W (r_n + n)
};

/// One attention head over a non-empty neighborhood. `head` is the entity's
/// previous-layer vector (read only by the translational attention form).
HeadResult attend(ad::Var transform, ad::Var head, std::span<const Message> messages,
                  const ModelConfig& config);
ad::Var attention_weights(ad::Var transform, ad::Var head, std::span<const Message> messages,
                          const ModelConfig& config);
ad::Var propagate_head(ad::Var transform, ad::Var head, std::span<const Message> messages,
                       const ModelConfig& config);

/// Concat: LeakyReLU(W_out [o_1; ...; o_m]). Average: LeakyReLU(mean(o_i)).
/// `output_transform` is ignored for averaging.
ad::Var aggregate(std::span<const ad::Var> head_outputs, Aggregator mode, ad::Var output_transform,
                  double slope);

/// Everything the scorer and the losses read from one forward pass.
struct ForwardPass {
  std::vector<ad::Var> entities;   // final-layer vectors
  std::vector<ad::Var> relations;  // raw relation embeddings
  std::vector<ad::Var> values;     // encoded attribute values, empty when attributes are off
};

/// Runs `config.layers` propagation layers over `neighborhood`. Layer 0 is
/// the raw entity table. Entities with no neighbors carry their previous
/// vector forward. Relation vectors and value encodings are shared by all
/// layers.
ForwardPass forward_all(ad::Tape& tape, const Neighborhood& neighborhood,
                        std::span<const AttributeValue> values, ModelParams& params,
                        const ModelConfig& config);

/// ||h + r - t|| under the configured norm.
ad::Var score(ad::Var head, ad::Var relation, ad::Var tail, Norm norm);
double distance(std::span<const double> head, std::span<const double> relation,
                std::span<const double> tail, Norm norm);

/// Raw class scores W e + b.
ad::Var classify(ad::Var entity, ad::Var weight, ad::Var bias);
std::vector<double> class_scores(std::span<const double> entity, const ad::Parameter& weight,
                                 const ad::Parameter& bias);

/// Plain-number copy of a forward pass over frozen parameters.
struct Embeddings {
  std::size_t dim = 0;
  std::vector<double> entities;
  std::vector<double> relations;
  std::vector<double> values;

  std::size_t entity_count() const { return dim ? entities.size() / dim : 0; }
  std::size_t relation_count() const { return dim ? relations.size() / dim : 0; }
  std::span<const double> entity(std::size_t i) const {
    return std::span<const double>(entities).subspan(i * dim, dim);
  }
  std::span<const double> relation(std::size_t i) const {
    return std::span<const double>(relations).subspan(i * dim, dim);
  }
  std::span<const double> value(std::size_t i) const {
    return std::span<const double>(values).subspan(i * dim, dim);
  }
};

Embeddings compute_embeddings(const Neighborhood& neighborhood,
                              std::span<const AttributeValue> values, ModelParams& params,
                              const ModelConfig& config);

std::string to_string(Aggregator a);
std::string to_string(Encoder e);
std::string to_string(Norm n);
std::string to_string(AttentionForm f);

}  // namespace kane
