#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crl/rng.hpp"
#include "crl/tensor.hpp"
#include "crl/vocab.hpp"

namespace crl {

enum class OpSym : std::uint8_t { Plus = 0, Times = 1, Minus = 2 };

// k digit terms in [0, 9] separated by k - 1 operators; surface form is the
// alternating token sequence of length 2k - 1.
struct Expression {
  std::vector<int> digits;
  std::vector<OpSym> ops;

  int terms() const { return static_cast<int>(digits.size()); }
  int token_count() const { return 2 * terms() - 1; }

  std::vector<int> token_ids(int lang) const;
  std::string text() const;  // numerals, e.g. "3+4*7"

  // Packing for dedup; exact for k <= 20.
  bool operator==(const Expression& other) const = default;
};

// Value under standard precedence (* binds tighter than +/-, which associate
// left), with every intermediate and the result reduced mod 10 into [0, 9].
int eval_mod10(const Expression& expr);

// Single binary operation mod 10.
int eval_binary_mod10(int a, OpSym op, int b);

Expression gen_expression(int k, SeededRng& rng);

// Parses numeral surface text like "3+4*7"; rejects malformed input.
Expression parse_expression(const std::string& text);

// One-hot rows for a token id sequence; rejects out-of-range ids.
Tensor encode_onehot(const std::vector<int>& ids, int width);

}  // namespace crl
