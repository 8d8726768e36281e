// SPDX-License-Identifier: Apache-2.0
#include "kane/encoders.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "kane/error.hpp"

namespace kane {

namespace {

constexpr const char* kGateNames[] = {"input", "forget", "output", "candidate"};

ad::Var word_row(ad::Tape& tape, ad::Parameter& table, WordId w) {
  if (w.v >= table.rows()) {
    throw LookupError("word id " + std::to_string(w.v) + " outside embedding table of " +
                      std::to_string(table.rows()) + " rows");
  }
  return tape.row(table, w.v);
}

}  // namespace

LstmParams LstmParams::init(std::size_t k, double bound, Rng& rng) {
  LstmParams p;
  for (std::size_t g = 0; g < 4; ++g) {
    const std::string gate = kGateNames[g];
    p.input[g] = ad::Parameter("lstm." + gate + ".input", ad::Shape{k, k});
    p.hidden[g] = ad::Parameter("lstm." + gate + ".hidden", ad::Shape{k, k});
    p.bias[g] = ad::Parameter("lstm." + gate + ".bias", ad::Shape{k});
    for (auto& x : p.input[g].value) x = rng.uniform(-bound, bound);
    for (auto& x : p.hidden[g].value) x = rng.uniform(-bound, bound);
  }
  for (auto& x : p.bias[static_cast<std::size_t>(Gate::Forget)].value) x = 1.0;
  return p;
}

LstmVars LstmVars::bind(ad::Tape& tape, LstmParams& params) {
  LstmVars v;
  for (std::size_t g = 0; g < 4; ++g) {
    v.input[g] = tape.parameter(params.input[g]);
    v.hidden[g] = tape.parameter(params.hidden[g]);
    v.bias[g] = tape.parameter(params.bias[g]);
  }
  return v;
}

ad::Var bow_encode(ad::Tape& tape, const AttributeValue& value, ad::Parameter& word_table) {
  if (value.tokens.empty()) throw ContractError("bow_encode: empty attribute value");
  // Summing in word-id order makes the result bit-identical under any permutation.
  auto ids = value.tokens;
  std::sort(ids.begin(), ids.end());
  std::vector<ad::Var> rows;
  rows.reserve(ids.size());
  for (auto w : ids) rows.push_back(word_row(tape, word_table, w));
  return rows.size() == 1 ? rows.front() : ad::sum(rows);
}

ad::Var lstm_encode(ad::Tape& tape, const AttributeValue& value, ad::Parameter& word_table,
                    const LstmVars& lstm) {
  if (value.tokens.empty()) throw ContractError("lstm_encode: empty attribute value");
  const std::size_t k = lstm.bias[0].shape()[0];
  if (word_table.cols() != k) {
    throw ShapeError("lstm_encode: word embeddings have dim " + std::to_string(word_table.cols()) +
                     ", cell has " + std::to_string(k));
  }
  auto h = tape.constant(std::vector<double>(k, 0.0));
  auto c = tape.constant(std::vector<double>(k, 0.0));
  auto gate = [&](Gate g, ad::Var x) {
    const auto i = static_cast<std::size_t>(g);
    return ad::add(ad::add(ad::matvec(lstm.input[i], x), ad::matvec(lstm.hidden[i], h)),
                   lstm.bias[i]);
  };
  for (auto w : value.tokens) {
    auto x = word_row(tape, word_table, w);
    auto in = ad::sigmoid(gate(Gate::Input, x));
    auto forget = ad::sigmoid(gate(Gate::Forget, x));
    auto out = ad::sigmoid(gate(Gate::Output, x));
    auto candidate = ad::tanh(gate(Gate::Candidate, x));
    c = ad::add(ad::mul(forget, c), ad::mul(in, candidate));
    h = ad::mul(out, ad::tanh(c));
  }
  return h;
}

}  // namespace kane
