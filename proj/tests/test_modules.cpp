#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crl/error.hpp"
#include "crl/expression.hpp"
#include "crl/modules.hpp"
#include "fd_check.hpp"

using namespace crl;
using namespace crl::testing;

namespace {

Tensor random_simplex_rows(int rows, int cols, SeededRng& rng) {
  Tensor t(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      t.at(r, c) = rng.uniform(0.0, 1.0) + 1e-6;
      sum += t.at(r, c);
    }
    for (int c = 0; c < cols; ++c) t.at(r, c) /= sum;
  }
  return t;
}

bool in_simplex(const Tensor& t, double tol = 1e-9) {
  for (int r = 0; r < t.rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < t.cols; ++c) {
      if (t.at(r, c) < 0.0) return false;
      sum += t.at(r, c);
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

ModuleSet make_set(int reducers, int translators, int width = 13, bool hardcoded = false) {
  SeededRng rng = SeededRng::stream(99, "mods");
  return init_module_set(ModuleConfig{width, reducers, translators, 32, hardcoded}, rng);
}

}  // namespace

TEST_CASE("init_module_set presets and validation") {
  CHECK_THROWS_AS((void)make_set(0, 5), CrlError);
  const ModuleSet pathological = make_set(4, 0, 66);
  CHECK(pathological.reducers.size() == 4);
  CHECK(pathological.translators.empty());
  for (const int r : {1, 3}) {
    for (const int t : {5, 8}) {
      const ModuleSet grid = make_set(r, t, 66);
      CHECK(static_cast<int>(grid.reducers.size()) == r);
      CHECK(static_cast<int>(grid.translators.size()) == t);
    }
  }
}

TEST_CASE("independently initialized modules differ") {
  const ModuleSet mods = make_set(2, 2);
  CHECK(max_abs_diff(mods.params[mods.reducers[0].w1], mods.params[mods.reducers[1].w1]) > 1e-6);
  CHECK(max_abs_diff(mods.params[mods.translators[0].w], mods.params[mods.translators[1].w]) > 1e-6);
}

TEST_CASE("reducer output is one simplex row") {
  const ModuleSet mods = make_set(1, 0);
  SeededRng rng = SeededRng::stream(4, "win");
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor window = random_simplex_rows(3, 13, rng);
    const Tensor out = reducer_apply(mods, 0, window);
    CHECK(out.rows == 1);
    CHECK(out.cols == 13);
    CHECK(in_simplex(out));
  }
  CHECK_THROWS_AS((void)reducer_apply(mods, 0, random_simplex_rows(3, 66, rng)), CrlError);
}

TEST_CASE("translator preserves length and position independence") {
  const ModuleSet mods = make_set(1, 2, 66);
  SeededRng rng = SeededRng::stream(5, "tr");
  const Tensor seq = random_simplex_rows(7, 66, rng);
  const Tensor out = translator_apply(mods, 1, seq);
  CHECK(out.rows == 7);
  CHECK(in_simplex(out));

  // permuting input rows permutes output rows identically
  Tensor reversed(7, 66);
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 66; ++c) reversed.at(r, c) = seq.at(6 - r, c);
  }
  const Tensor out_rev = translator_apply(mods, 1, reversed);
  for (int r = 0; r < 7; ++r) {
    for (int c = 0; c < 66; ++c) {
      CHECK(out_rev.at(r, c) == out.at(6 - r, c));
    }
  }
}

TEST_CASE("scaled identity translator is near-identity on one-hots") {
  ModuleSet mods = make_set(1, 1);
  Tensor& w = mods.params[mods.translators[0].w];
  w = Tensor(13, 13);
  for (int i = 0; i < 13; ++i) w.at(i, i) = 50.0;
  const Tensor seq = encode_onehot({3, 11, 7}, 13);
  const Tensor out = translator_apply(mods, 0, seq);
  for (int r = 0; r < 3; ++r) {
    CHECK(argmax_row(out, r) == argmax_row(seq, r));
    CHECK(out.at(r, argmax_row(seq, r)) > 0.99);
  }
}

TEST_CASE("hardcoded reducer evaluates windows exactly") {
  auto window = [](int a, int op_local, int b) {
    return encode_onehot({a, op_local, b}, 13);
  };
  Tensor out;
  REQUIRE(hardcoded_reduce(window(3, 10, 2), &out));
  CHECK(argmax_row(out, 0) == 5);
  REQUIRE(hardcoded_reduce(window(3, 11, 4), &out));
  CHECK(argmax_row(out, 0) == 2);
  REQUIRE(hardcoded_reduce(window(0, 12, 4), &out));
  CHECK(argmax_row(out, 0) == 6);
  // malformed: no operator in the middle
  CHECK(!hardcoded_reduce(window(3, 5, 2), &out));
  // malformed: operator on the side
  CHECK(!hardcoded_reduce(window(11, 10, 2), &out));
}

TEST_CASE("module chains stay in the simplex") {
  const ModuleSet mods = make_set(2, 2, 13);
  SeededRng rng = SeededRng::stream(6, "chain");
  for (int trial = 0; trial < 500; ++trial) {
    Tensor seq = random_simplex_rows(2 + rng.uniform_int(8), 13, rng);
    for (int step = 0; step < 6; ++step) {
      if (seq.rows >= 3 && rng.uniform() < 0.5) {
        const int w = rng.uniform_int(seq.rows - 2);
        Tensor window(3, 13);
        for (int r = 0; r < 3; ++r) {
          for (int c = 0; c < 13; ++c) window.at(r, c) = seq.at(w + r, c);
        }
        const Tensor produced = reducer_apply(mods, rng.uniform_int(2), window);
        Tensor next(seq.rows - 2, 13);
        int rr = 0;
        for (int r = 0; r < seq.rows; ++r) {
          if (r == w) {
            for (int c = 0; c < 13; ++c) next.at(rr, c) = produced.at(0, c);
            r += 2;
          } else {
            for (int c = 0; c < 13; ++c) next.at(rr, c) = seq.at(r, c);
          }
          ++rr;
        }
        seq = next;
      } else {
        seq = translator_apply(mods, rng.uniform_int(2), seq);
      }
      CHECK(in_simplex(seq));
    }
  }
}

TEST_CASE("tape and plain module paths agree") {
  const ModuleSet mods = make_set(2, 2, 13);
  SeededRng rng = SeededRng::stream(7, "parity");
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor window = random_simplex_rows(3, 13, rng);
    const Tensor plain = reducer_apply(mods, 1, window);
    Tape tape;
    const TapeParams tp = push_params(tape, mods.params);
    const int node = reducer_apply_tape(tape, tp, mods, 1, tape.leaf(row_of(window, 0)),
                                        tape.leaf(row_of(window, 1)), tape.leaf(row_of(window, 2)));
    CHECK(max_abs_diff(plain, tape.value(node)) <= 1e-13);

    const Tensor seq = random_simplex_rows(4, 13, rng);
    const Tensor plain_tr = translator_apply(mods, 0, seq);
    for (int r = 0; r < seq.rows; ++r) {
      const int row_node = translator_row_tape(tape, tp, mods, 0, tape.leaf(row_of(seq, r)));
      CHECK(max_abs_diff(row_of(plain_tr, r), tape.value(row_node)) <= 1e-13);
    }
  }
}
