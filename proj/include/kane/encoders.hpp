// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>

#include "kane/autodiff.hpp"
#include "kane/kg.hpp"
#include "kane/random.hpp"

namespace kane {

enum class Gate : std::size_t { Input = 0, Forget = 1, Output = 2, Candidate = 3 };

/// Standard LSTM cell weights. Gate order follows `Gate`.
struct LstmParams {
  std::array<ad::Parameter, 4> input;   // k x k, applied to the token embedding
  std::array<ad::Parameter, 4> hidden;  // k x k, applied to the previous hidden state
  std::array<ad::Parameter, 4> bias;    // k

  /// Weights uniform in [-bound, bound]; forget bias 1, other biases 0.
  static LstmParams init(std::size_t k, double bound, Rng& rng);
  std::size_t dim() const { return bias[0].value.size(); }
};

/// LSTM weights read onto one tape.
struct LstmVars {
  std::array<ad::Var, 4> input;
  std::array<ad::Var, 4> hidden;
  std::array<ad::Var, 4> bias;

  static LstmVars bind(ad::Tape& tape, LstmParams& params);
};

/// Sum of the word embeddings of the value's tokens.
ad::Var bow_encode(ad::Tape& tape, const AttributeValue& value, ad::Parameter& word_table);

/// Final hidden state after running the cell left to right from zero state.
ad::Var lstm_encode(ad::Tape& tape, const AttributeValue& value, ad::Parameter& word_table,
                    const LstmVars& lstm);

}  // namespace kane
