// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers: random graphs, conversion into the oracle's plain
// representation, and a central-difference gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kane/autodiff.hpp"
#include "kane/kg.hpp"
#include "kane/random.hpp"
#include "kane/training.hpp"
#include "oracle.hpp"

namespace fixtures {

/// Random graph with names e<i>, r<j>, attribute relations a<j> and
/// literals of 1-4 words drawn from v0..v<vocab-1>.
inline kane::KnowledgeGraph random_kg(kane::Rng& rng, std::size_t entities, std::size_t relations,
                                      std::size_t triples, std::size_t attr_triples,
                                      std::size_t vocab = 8, std::size_t attr_relations = 2) {
  kane::KnowledgeGraph kg;
  for (std::size_t i = 0; i < entities; ++i) kg.intern_entity("e" + std::to_string(i));
  std::vector<kane::RelationId> rels, attrs;
  for (std::size_t j = 0; j < relations; ++j) rels.push_back(kg.intern_relation("r" + std::to_string(j)));
  for (std::size_t j = 0; j < attr_relations; ++j) attrs.push_back(kg.intern_relation("a" + std::to_string(j)));
  std::vector<kane::RelationTriple> rt;
  for (std::size_t i = 0; i < triples; ++i) {
    rt.push_back({{static_cast<std::uint32_t>(rng.below(entities))},
                  rels[rng.below(rels.size())],
                  {static_cast<std::uint32_t>(rng.below(entities))}});
  }
  kg.add_relation_triples(rt);
  std::vector<kane::AttributeTriple> at;
  for (std::size_t i = 0; i < attr_triples && !attrs.empty(); ++i) {
    std::string lit;
    const auto n = 1 + rng.below(4);
    for (std::size_t w = 0; w < n; ++w) lit += (w ? " v" : "v") + std::to_string(rng.below(vocab));
    at.push_back({{static_cast<std::uint32_t>(rng.below(entities))}, attrs[rng.below(attrs.size())],
                  kg.intern_value(lit)});
  }
  kg.add_attribute_triples(at);
  return kg;
}

inline oracle::Graph graph_of(const kane::KnowledgeGraph& kg,
                              std::span<const kane::RelationTriple> rel, bool with_attributes) {
  oracle::Graph g;
  g.entities = kg.entity_count();
  for (const auto& t : rel) g.rel.push_back({t.head.v, t.relation.v, t.tail.v});
  if (with_attributes) {
    for (const auto& t : kg.attribute_triples()) {
      oracle::AttrTriple a{t.head.v, t.relation.v, {}};
      for (auto w : kg.value(t.value).tokens) a.tokens.push_back(w.v);
      g.attr.push_back(a);
    }
  }
  return g;
}

inline oracle::Known known_of(const kane::KnowledgeGraph& kg) {
  oracle::Known k;
  for (const auto& t : kg.relation_triples()) k.insert({t.head.v, t.relation.v, t.tail.v});
  return k;
}

inline void fill_random(kane::ad::Parameter& p, kane::Rng& rng, double lo = -1.0, double hi = 1.0) {
  for (auto& x : p.value) x = rng.uniform(lo, hi);
  p.zero_grad();
}

struct GradReport {
  double max_error = 0.0;  // |analytic - numeric| / max(1, |numeric|)
  std::size_t coordinates = 0;
};

/// Compares tape gradients of `build` against central differences for every
/// coordinate of `params` (or `limit` random coordinates per parameter).
inline GradReport check_gradients(const std::function<kane::ad::Var(kane::ad::Tape&)>& build,
                                  std::vector<kane::ad::Parameter*> params, double step = 1e-6,
                                  std::size_t limit = 0, kane::Rng* rng = nullptr) {
  kane::ad::Tape tape;
  for (auto* p : params) p->zero_grad();
  auto root = build(tape);
  tape.backward(root);
  std::vector<std::vector<double>> analytic;
  for (auto* p : params) analytic.push_back(p->grad);
  auto eval = [&]() {
    kane::ad::Tape t;
    return build(t).item();
  };
  GradReport rep;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto* p = params[pi];
    std::vector<std::size_t> coords;
    if (limit == 0 || limit >= p->value.size()) {
      for (std::size_t i = 0; i < p->value.size(); ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < limit; ++i) coords.push_back(rng->below(p->value.size()));
    }
    for (auto i : coords) {
      const double v = p->value[i];
      p->value[i] = v + step;
      const double up = eval();
      p->value[i] = v - step;
      const double down = eval();
      p->value[i] = v;
      const double numeric = (up - down) / (2 * step);
      const double err = std::fabs(analytic[pi][i] - numeric) / std::max(1.0, std::fabs(numeric));
      rep.max_error = std::max(rep.max_error, err);
      ++rep.coordinates;
    }
  }
  for (auto* p : params) p->zero_grad();
  return rep;
}

}  // namespace fixtures
