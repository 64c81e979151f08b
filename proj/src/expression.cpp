#include "crl/expression.hpp"

#include "crl/error.hpp"

namespace crl {

std::vector<int> Expression::token_ids(int lang) const {
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(token_count()));
  const int base = Vocab::kBlock * lang;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    ids.push_back(base + digits[i]);
    if (i + 1 < digits.size()) {
      ids.push_back(base + Vocab::kPlusLocal + static_cast<int>(ops[i]));
    }
  }
  return ids;
}

std::string Expression::text() const {
  static const char kOpChar[3] = {'+', '*', '-'};
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    out += static_cast<char>('0' + digits[i]);
    if (i + 1 < digits.size()) out += kOpChar[static_cast<int>(ops[i])];
  }
  return out;
}

int eval_binary_mod10(int a, OpSym op, int b) {
  switch (op) {
    case OpSym::Plus:
      return (a + b) % 10;
    case OpSym::Times:
      return (a * b) % 10;
    case OpSym::Minus:
      return ((a - b) % 10 + 10) % 10;
  }
  fail("internal", "bad operator");
}

int eval_mod10(const Expression& expr) {
  if (expr.digits.empty()) fail("expression", "empty expression");
  // Pass 1 collapses multiplication runs, pass 2 folds +/- left to right.
  std::vector<int> terms;
  std::vector<OpSym> adds;
  int cur = expr.digits[0];
  for (std::size_t i = 0; i < expr.ops.size(); ++i) {
    if (expr.ops[i] == OpSym::Times) {
      cur = eval_binary_mod10(cur, OpSym::Times, expr.digits[i + 1]);
    } else {
      terms.push_back(cur);
      adds.push_back(expr.ops[i]);
      cur = expr.digits[i + 1];
    }
  }
  terms.push_back(cur);
  int acc = terms[0];
  for (std::size_t i = 0; i < adds.size(); ++i) {
    acc = eval_binary_mod10(acc, adds[i], terms[i + 1]);
  }
  return acc;
}

Expression gen_expression(int k, SeededRng& rng) {
  if (k < 1) fail("expression", "term count must be >= 1, got " + std::to_string(k));
  Expression e;
  e.digits.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) e.digits.push_back(rng.uniform_int(10));
  e.ops.reserve(static_cast<std::size_t>(k - 1));
  for (int i = 0; i + 1 < k; ++i) e.ops.push_back(static_cast<OpSym>(rng.uniform_int(3)));
  return e;
}

Expression parse_expression(const std::string& text) {
  Expression e;
  bool want_digit = true;
  for (const char ch : text) {
    if (want_digit) {
      if (ch < '0' || ch > '9') fail("expression", "expected digit in \"" + text + "\"");
      e.digits.push_back(ch - '0');
    } else {
      OpSym op;
      if (ch == '+') {
        op = OpSym::Plus;
      } else if (ch == '*') {
        op = OpSym::Times;
      } else if (ch == '-') {
        op = OpSym::Minus;
      } else {
        fail("expression", "expected operator in \"" + text + "\"");
      }
      e.ops.push_back(op);
    }
    want_digit = !want_digit;
  }
  if (e.digits.empty() || want_digit) fail("expression", "malformed expression \"" + text + "\"");
  return e;
}

Tensor encode_onehot(const std::vector<int>& ids, int width) {
  Tensor out(static_cast<int>(ids.size()), width);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= width) {
      fail("vocab", "token id " + std::to_string(ids[i]) + " outside width " +
                        std::to_string(width));
    }
    out.at(static_cast<int>(i), ids[i]) = 1.0;
  }
  return out;
}

}  // namespace crl
