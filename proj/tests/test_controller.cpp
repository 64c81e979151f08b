#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "crl/controller.hpp"
#include "crl/error.hpp"
#include "crl/expression.hpp"
#include "fd_check.hpp"

using namespace crl;
using namespace crl::testing;

namespace {

ControllerParams make_ctrl(ControllerConfig cfg, std::uint64_t seed = 1) {
  SeededRng rng = SeededRng::stream(seed, "ctrl");
  return init_controller(cfg, rng);
}

ControllerConfig numerical_cfg() {
  ControllerConfig cfg;
  cfg.vocab_width = 13;
  cfg.target_dim = 0;
  cfg.hidden = 16;
  cfg.reducers = 2;
  cfg.translators = 0;
  return cfg;
}

ControllerConfig multilingual_cfg() {
  ControllerConfig cfg;
  cfg.vocab_width = 66;
  cfg.target_dim = 5;
  cfg.hidden = 16;
  cfg.reducers = 3;
  cfg.translators = 8;
  return cfg;
}

Tensor target_onehot(int tgt) {
  Tensor t(1, 5);
  t.at(0, tgt) = 1.0;
  return t;
}

double logp_sum(const std::vector<double>& logp) {
  double s = 0.0;
  for (const double lp : logp) s += std::exp(lp);
  return s;
}

}  // namespace

TEST_CASE("available action kinds follow the configuration") {
  CHECK(make_ctrl(numerical_cfg()).kinds ==
        std::vector<ActionKind>{ActionKind::Halt, ActionKind::Reduce});
  CHECK(make_ctrl(multilingual_cfg()).kinds ==
        std::vector<ActionKind>{ActionKind::Halt, ActionKind::Reduce, ActionKind::Translate});
  ControllerConfig bounded = multilingual_cfg();
  bounded.allow_halt = false;
  CHECK(make_ctrl(bounded).kinds ==
        std::vector<ActionKind>{ActionKind::Reduce, ActionKind::Translate});
}

TEST_CASE("window candidates and the variable action space") {
  const Tensor nine = encode_onehot(parse_expression("1+2*3-4+5").token_ids(0), 13);
  CHECK(window_candidates(nine, false).size() == 7);
  CHECK(window_candidates(nine, true) == std::vector<int>{0, 2, 4, 6});
  const Tensor single = encode_onehot({4}, 13);
  CHECK(window_candidates(single, false).empty());

  const ControllerParams ctrl = make_ctrl(numerical_cfg());
  for (int k = 2; k <= 8; ++k) {
    SeededRng rng = SeededRng::stream(7, "ws", static_cast<std::uint64_t>(k));
    const Expression e = gen_expression(k, rng);
    const Tensor state = encode_onehot(e.token_ids(0), 13);
    const ControllerDists dists = controller_forward(ctrl, state, Tensor());
    CHECK(static_cast<int>(dists.win_logp.size()) == 2 * k - 3);
    CHECK(logp_sum(dists.kind_logp) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(logp_sum(dists.red_logp) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(logp_sum(dists.win_logp) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("empty state is rejected") {
  const ControllerParams ctrl = make_ctrl(numerical_cfg());
  CHECK_THROWS_AS((void)controller_forward(ctrl, Tensor(0, 13), Tensor()), CrlError);
}

TEST_CASE("target language changes the policy") {
  const ControllerParams ctrl = make_ctrl(multilingual_cfg());
  const Tensor state = encode_onehot(parse_expression("1+2").token_ids(2), 66);
  const ControllerDists a = controller_forward(ctrl, state, target_onehot(0));
  const ControllerDists b = controller_forward(ctrl, state, target_onehot(3));
  double diff = 0.0;
  for (std::size_t i = 0; i < a.kind_logp.size(); ++i) {
    diff = std::max(diff, std::abs(a.kind_logp[i] - b.kind_logp[i]));
  }
  CHECK(diff > 1e-9);
  CHECK(a.value != b.value);
}

TEST_CASE("joint log-prob factorizes and greedy is deterministic") {
  const ControllerParams ctrl = make_ctrl(multilingual_cfg());
  const Tensor state = encode_onehot(parse_expression("1+2*3").token_ids(1), 66);
  const Tensor target = target_onehot(4);
  const ControllerDists dists = controller_forward(ctrl, state, target);

  SeededRng rng = SeededRng::stream(3, "sample");
  for (int trial = 0; trial < 200; ++trial) {
    const ActionSample a = sample_action(ctrl, dists, false, rng);
    double expect = dists.kind_logp[static_cast<std::size_t>(ctrl.kind_index(a.kind))];
    if (a.kind == ActionKind::Reduce) {
      expect += dists.red_logp[static_cast<std::size_t>(a.module)];
      if (a.window >= 0) {
        for (std::size_t i = 0; i < dists.candidates.size(); ++i) {
          if (dists.candidates[i] == a.window) expect += dists.win_logp[i];
        }
      }
    } else if (a.kind == ActionKind::Translate) {
      expect += dists.tr_logp[static_cast<std::size_t>(a.module)];
    }
    CHECK(a.logp == doctest::Approx(expect).epsilon(1e-12));
  }

  const ActionSample g1 = sample_action(ctrl, dists, true, rng);
  const ActionSample g2 = sample_action(ctrl, dists, true, rng);
  CHECK(g1.kind == g2.kind);
  CHECK(g1.module == g2.module);
  CHECK(g1.window == g2.window);
}

TEST_CASE("value head is finite and state-sensitive") {
  const ControllerParams ctrl = make_ctrl(numerical_cfg());
  const ControllerDists a =
      controller_forward(ctrl, encode_onehot(parse_expression("1+2").token_ids(0), 13), Tensor());
  const ControllerDists b =
      controller_forward(ctrl, encode_onehot(parse_expression("7*7").token_ids(0), 13), Tensor());
  CHECK(std::isfinite(a.value));
  CHECK(a.value != b.value);
}

TEST_CASE("plain and tape controller paths agree") {
  for (const bool shared : {true, false}) {
    ControllerConfig cfg = multilingual_cfg();
    cfg.shared_encoder = shared;
    const ControllerParams ctrl = make_ctrl(cfg, shared ? 5 : 6);
    SeededRng rng = SeededRng::stream(8, "parity");
    for (int trial = 0; trial < 30; ++trial) {
      const int k = 1 + rng.uniform_int(4);
      const Expression e = gen_expression(k, rng);
      const Tensor state = encode_onehot(e.token_ids(rng.uniform_int(5)), 66);
      const Tensor target = target_onehot(rng.uniform_int(5));
      const ControllerDists dists = controller_forward(ctrl, state, target);
      const ActionSample action = sample_action(ctrl, dists, false, rng);

      Tape tape;
      const TapeParams tp = push_params(tape, ctrl.params);
      const ControllerEvalNodes nodes =
          controller_eval_tape(tape, tp, ctrl, state, target, action);
      CHECK(std::abs(tape.scalar(nodes.logp) - action.logp) <= 1e-12);
      CHECK(std::abs(tape.scalar(nodes.value) - action.value) <= 1e-12);
      CHECK(std::abs(tape.scalar(nodes.entropy) - action.entropy) <= 1e-10);
    }
  }
}

TEST_CASE("hcf restriction masks the window head") {
  ControllerConfig cfg = numerical_cfg();
  cfg.operator_windows = true;
  const ControllerParams ctrl = make_ctrl(cfg);
  const Tensor state = encode_onehot(parse_expression("1+2*3-4+5").token_ids(0), 13);
  const ControllerDists dists = controller_forward(ctrl, state, Tensor());
  CHECK(dists.candidates == std::vector<int>{0, 2, 4, 6});
  CHECK(logp_sum(dists.win_logp) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("hardcoded controller follows order of operations") {
  auto state_of = [](const std::string& text) {
    return encode_onehot(parse_expression(text).token_ids(0), 13);
  };
  const ActionSample times = hardcoded_controller_action(state_of("3+4*7"));
  CHECK(times.kind == ActionKind::Reduce);
  CHECK(times.window == 2);
  CHECK(times.module == 0);

  const ActionSample left = hardcoded_controller_action(state_of("2+3+4"));
  CHECK(left.kind == ActionKind::Reduce);
  CHECK(left.window == 0);

  const ActionSample halt = hardcoded_controller_action(state_of("7"));
  CHECK(halt.kind == ActionKind::Halt);

  // malformed: operators everywhere
  const ActionSample broken = hardcoded_controller_action(encode_onehot({10, 11, 12}, 13));
  CHECK(broken.kind == ActionKind::Halt);
}
