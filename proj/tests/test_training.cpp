#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crl/error.hpp"
#include "crl/expression.hpp"
#include "crl/training.hpp"

using namespace crl;

namespace fs = std::filesystem;

namespace {

struct TinySetup {
  Dataset ds;
  ControllerParams ctrl;
  ModuleSet mods;
  Vocab vocab{1};
  HorizonMode mode{};

  static TinySetup make(std::uint64_t seed = 1, int hidden = 8) {
    TinySetup s{build_numerical_dataset(1, 0), {}, {}};
    SeededRng rng = SeededRng::stream(seed, "tiny");
    ControllerConfig cc;
    cc.vocab_width = 13;
    cc.hidden = hidden;
    cc.reducers = 1;
    s.ctrl = init_controller(cc, rng);
    s.mods = init_module_set(ModuleConfig{13, 1, 0, 16, false}, rng);
    return s;
  }

  std::vector<const ProblemInstance*> pool(int max_len) const {
    return ds.curriculum_pool(max_len);
  }
};

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("rollout collection is indexed, not order-dependent") {
  TinySetup s = TinySetup::make();
  const RolloutPolicy policy{&s.ctrl, false};
  const auto pool = s.pool(3);

  RolloutBuffer whole;
  collect_rollouts(whole, 10, policy, s.mods, pool, s.vocab, s.mode, 42, 100,
                   CollectMode::Training);
  RolloutBuffer part;
  collect_rollouts(part, 4, policy, s.mods, pool, s.vocab, s.mode, 42, 100,
                   CollectMode::Training);
  collect_rollouts(part, 6, policy, s.mods, pool, s.vocab, s.mode, 42, 104,
                   CollectMode::Training);

  REQUIRE(whole.traces.size() == part.traces.size());
  for (std::size_t i = 0; i < whole.traces.size(); ++i) {
    CHECK(whole.traces[i].problem.input_ids == part.traces[i].problem.input_ids);
    REQUIRE(whole.traces[i].steps.size() == part.traces[i].steps.size());
    for (std::size_t t = 0; t < whole.traces[i].steps.size(); ++t) {
      CHECK(whole.traces[i].steps[t].action.logp == part.traces[i].steps[t].action.logp);
      CHECK(whole.traces[i].steps[t].reward == part.traces[i].steps[t].reward);
    }
  }
}

TEST_CASE("returns-to-go and advantages") {
  RolloutBuffer buffer;
  TraceRecord t;
  t.problem = make_instance(parse_expression("1+2+3"), 0, 0);
  for (int i = 0; i < 3; ++i) {
    TraceStep step;
    step.reward = i == 2 ? 1.0 - 0.01 : -0.01;
    step.action.value = 0.25;
    t.steps.push_back(step);
  }
  buffer.traces.push_back(t);
  const std::vector<StepRef> steps = flatten_with_returns(buffer);
  REQUIRE(steps.size() == 3);
  // 3-step correct episode: return at t=0 is 0.97
  CHECK(steps[0].ret == doctest::Approx(0.97));
  CHECK(steps[1].ret == doctest::Approx(0.98));
  CHECK(steps[2].ret == doctest::Approx(0.99));
  CHECK(steps[0].adv == doctest::Approx(0.97 - 0.25));
}

TEST_CASE("clip arithmetic of the surrogate") {
  // ratio 1.5, clip 0.2, positive advantage: the clipped branch is active
  // (1.2 A < 1.5 A), so the policy-term gradient vanishes.
  const double ratio = 1.5, clip = 0.2, adv = 2.0;
  const double surr1 = ratio * adv;
  const double surr2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
  CHECK(std::min(surr1, surr2) == doctest::Approx(1.2 * adv));
  const bool clipped_out = (adv > 0.0 && ratio > 1.0 + clip) || (adv < 0.0 && ratio < 1.0 - clip);
  CHECK(clipped_out);
}

TEST_CASE("degenerate ppo reduces to policy gradient with baseline") {
  TinySetup s = TinySetup::make(3);
  ControllerConfig cc = s.ctrl.cfg;
  cc.shared_encoder = false;  // value parameters disjoint from the policy path
  SeededRng rng = SeededRng::stream(9, "pg");
  s.ctrl = init_controller(cc, rng);

  RolloutBuffer buffer;
  collect_rollouts(buffer, 12, RolloutPolicy{&s.ctrl, false}, s.mods, s.pool(3), s.vocab,
                   s.mode, 7, 0, CollectMode::Training);
  const std::vector<StepRef> steps = flatten_with_returns(buffer);
  REQUIRE(!steps.empty());

  // single epoch, full batch, entropy 0, value 0, clip effectively infinite
  SurrogateSettings settings;
  settings.clip = 1e18;
  settings.entropy_coef = 0.0;
  settings.value_coef = 0.0;
  const std::vector<Tensor> impl = surrogate_gradient(s.ctrl, steps, settings, nullptr);

  // independent reinforce-with-baseline: sum over steps of -adv * grad(logp) / B
  std::vector<Tensor> oracle(static_cast<std::size_t>(s.ctrl.params.count()));
  const double inv = 1.0 / static_cast<double>(steps.size());
  for (const StepRef& ref : steps) {
    const TraceStep& ts = ref.trace->steps[static_cast<std::size_t>(ref.step)];
    Tape tape;
    const TapeParams tp = push_params(tape, s.ctrl.params);
    const ControllerEvalNodes nodes =
        controller_eval_tape(tape, tp, s.ctrl, ts.pre_state, Tensor(), ts.action);
    const std::vector<Tensor> g = tape.param_grads(nodes.logp, s.ctrl.params.count());
    for (std::size_t p = 0; p < g.size(); ++p) {
      if (g[p].empty()) continue;
      if (oracle[p].empty()) oracle[p] = Tensor(g[p].rows, g[p].cols);
      for (int i = 0; i < g[p].size(); ++i) {
        oracle[p].data[static_cast<std::size_t>(i)] +=
            -ref.adv * inv * g[p].data[static_cast<std::size_t>(i)];
      }
    }
  }

  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < oracle.size(); ++p) {
    const int n = !impl[p].empty() ? impl[p].size() : (!oracle[p].empty() ? oracle[p].size() : 0);
    for (int i = 0; i < n; ++i) {
      const double a = impl[p].empty() ? 0.0 : impl[p].data[static_cast<std::size_t>(i)];
      const double b = oracle[p].empty() ? 0.0 : oracle[p].data[static_cast<std::size_t>(i)];
      num += (a - b) * (a - b);
      den += std::max(a * a, b * b);
    }
  }
  REQUIRE(den > 0.0);
  CHECK(std::sqrt(num / den) <= 1e-6);
}

TEST_CASE("identical parameters give unit ratio and active gradients") {
  TinySetup s = TinySetup::make(5);
  RolloutBuffer buffer;
  collect_rollouts(buffer, 6, RolloutPolicy{&s.ctrl, false}, s.mods, s.pool(2), s.vocab,
                   s.mode, 11, 0, CollectMode::Training);
  const std::vector<StepRef> steps = flatten_with_returns(buffer);
  // at unchanged parameters the tape logp equals the stored logp
  for (const StepRef& ref : steps) {
    const TraceStep& ts = ref.trace->steps[static_cast<std::size_t>(ref.step)];
    Tape tape;
    const TapeParams tp = push_params(tape, s.ctrl.params);
    const ControllerEvalNodes nodes =
        controller_eval_tape(tape, tp, s.ctrl, ts.pre_state, Tensor(), ts.action);
    CHECK(std::abs(tape.scalar(nodes.logp) - ts.action.logp) <= 1e-12);
  }
}

TEST_CASE("controller update trains only the controller; module update only modules") {
  TinySetup s = TinySetup::make(6);
  RolloutBuffer buffer;
  collect_rollouts(buffer, 32, RolloutPolicy{&s.ctrl, false}, s.mods, s.pool(3), s.vocab,
                   s.mode, 13, 0, CollectMode::Training);

  const std::vector<Tensor> mods_before = s.mods.params.values;
  AdamState adam_ctrl;
  TrainConfig cfg;
  cfg.minibatch = 64;
  cfg.ppo_epochs = 2;
  CHECK(controller_update(s.ctrl, adam_ctrl, buffer, cfg, 0));
  for (std::size_t i = 0; i < mods_before.size(); ++i) {
    CHECK(max_abs_diff(mods_before[i], s.mods.params.values[i]) == 0.0);
  }

  const std::vector<Tensor> ctrl_before = s.ctrl.params.values;
  AdamState adam_mods;
  const int eligible = module_update(s.mods, adam_mods, buffer.traces, s.vocab);
  CHECK(eligible > 0);
  for (std::size_t i = 0; i < ctrl_before.size(); ++i) {
    CHECK(max_abs_diff(ctrl_before[i], s.ctrl.params.values[i]) == 0.0);
  }
}

TEST_CASE("module update loss is the mean answer NLL of eligible episodes") {
  TinySetup s = TinySetup::make(7);
  // hand-build one fully reduced single-step trace: 1+2 reduced at window 0
  const ProblemInstance inst = make_instance(parse_expression("1+2"), 0, 0);
  TraceRecord trace;
  trace.problem = inst;
  TraceStep step;
  step.action.kind = ActionKind::Reduce;
  step.action.module = 0;
  step.action.window = 0;
  step.note = StepNote::Applied;
  trace.steps.push_back(step);
  trace.fully_reduced = true;

  const Tensor window = encode_onehot(inst.input_ids, 13);
  const Tensor p = reducer_apply(s.mods, 0, window);
  const double expect = -std::log(p.at(0, inst.answer_id));

  AdamState adam;
  double loss = 0.0;
  std::vector<TraceRecord> episodes = {trace};
  CHECK(module_update(s.mods, adam, episodes, s.vocab, &loss) == 1);
  CHECK(loss == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("batches with no eligible episode skip the update") {
  TinySetup s = TinySetup::make(8);
  TraceRecord unreduced;
  unreduced.problem = make_instance(parse_expression("1+2+3"), 0, 0);
  unreduced.fully_reduced = false;
  const std::vector<Tensor> before = s.mods.params.values;
  AdamState adam;
  std::vector<TraceRecord> episodes = {unreduced};
  CHECK(module_update(s.mods, adam, episodes, s.vocab) == 0);
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(max_abs_diff(before[i], s.mods.params.values[i]) == 0.0);
  }
}

TEST_CASE("module recomputation reproduces recorded final distributions") {
  TinySetup s = TinySetup::make(9);
  RolloutBuffer buffer;
  collect_rollouts(buffer, 50, RolloutPolicy{&s.ctrl, false}, s.mods, s.pool(4), s.vocab,
                   s.mode, 17, 0, CollectMode::Training);
  int checked = 0;
  for (const TraceRecord& trace : buffer.traces) {
    if (!trace.fully_reduced) continue;
    const Tensor redo = recompute_final_distribution(s.mods, trace, s.vocab);
    REQUIRE(!redo.empty());
    CHECK(max_abs_diff(redo, trace.final_dist) <= 1e-9);
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("baseline input encoding and near-perfect prediction loss") {
  const Vocab vocab{5};
  const ProblemInstance inst = make_instance(parse_expression("1+2"), 2, 3);
  const Tensor input = baseline_input(inst, vocab);
  CHECK(input.rows == 5);             // marker + 3 tokens + STOP
  CHECK(input.cols == 66 + 5);        // vocab width plus the language marker block
  CHECK(input.at(0, 66 + 3) == 1.0);  // target marker
  CHECK(input.at(4, Vocab::kStopId) == 1.0);

  // force the output head toward the answer: loss -> -log(~1) ~ 0
  SeededRng rng = SeededRng::stream(10, "bl");
  BaselineParams net = init_baseline(BaselineConfig{5, 8}, rng);
  net.params[net.b_out] = Tensor(1, 66);
  net.params[net.b_out].at(0, inst.answer_id) = 60.0;
  const Tensor probs = baseline_forward(net, input);
  CHECK(argmax_row(probs, 0) == inst.answer_id);
  CHECK(-std::log(probs.at(0, inst.answer_id)) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("training runs are reproducible byte for byte") {
  const fs::path dir1 = fs::temp_directory_path() / "crl_repeat1";
  const fs::path dir2 = fs::temp_directory_path() / "crl_repeat2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  TrainConfig cfg;
  cfg.task = "numerical";
  cfg.model = "crl";
  cfg.reducers = 1;
  cfg.controller_hidden = 12;
  cfg.module_hidden = 16;
  cfg.episodes = 1024;
  cfg.k_controller = 256;
  cfg.k_modules = 128;
  cfg.minibatch = 128;
  cfg.ppo_epochs = 2;
  cfg.curriculum = false;
  cfg.max_len = 3;
  cfg.eval_every = 512;
  cfg.eval_subsample = 50;
  cfg.seed = 5;

  const Dataset ds = build_numerical_dataset(1, 0);
  train_run(cfg, ds, dir1.string());
  train_run(cfg, ds, dir2.string());

  CHECK(file_bytes(dir1 / "eval.csv") == file_bytes(dir2 / "eval.csv"));
  CHECK(file_bytes(dir1 / "checkpoint_final.txt") == file_bytes(dir2 / "checkpoint_final.txt"));
  CHECK(!file_bytes(dir1 / "eval.csv").empty());
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("checkpoints restore models that behave identically") {
  const fs::path dir = fs::temp_directory_path() / "crl_ckpt_run";
  fs::remove_all(dir);
  TrainConfig cfg;
  cfg.task = "numerical";
  cfg.model = "crl";
  cfg.reducers = 1;
  cfg.controller_hidden = 10;
  cfg.module_hidden = 12;
  cfg.episodes = 256;
  cfg.k_controller = 128;
  cfg.k_modules = 64;
  cfg.minibatch = 64;
  cfg.ppo_epochs = 1;
  cfg.curriculum = false;
  cfg.max_len = 3;
  cfg.eval_every = 0;
  cfg.seed = 2;
  const Dataset ds = build_numerical_dataset(1, 0);
  const TrainOutput out = train_run(cfg, ds, dir.string());
  REQUIRE(!out.checkpoint_path.empty());

  const LoadedModel model = load_model(out.checkpoint_path);
  CHECK(model.cfg.model == "crl");
  const EvalOptions opt{cfg.episodes, cfg.seed, 0, 0, false, false, true, false};
  const std::vector<EvalRow> again =
      evaluate_model(RolloutPolicy{&model.ctrl, true}, model.mods, ds, cfg.horizon(), opt);
  std::vector<EvalRow> expect;
  for (const EvalRow& row : out.final_eval) {
    if (row.split == "test") expect.push_back(row);
  }
  REQUIRE(again.size() == expect.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].accuracy == expect[i].accuracy);
  }
  fs::remove_all(dir);
}

TEST_CASE("every model kind completes a small run") {
  const Dataset ds = build_numerical_dataset(1, 0);
  for (const std::string model : {"crl", "hcc", "hcf", "rnn"}) {
    TrainConfig cfg;
    cfg.task = "numerical";
    cfg.model = model;
    cfg.reducers = 1;
    cfg.controller_hidden = 10;
    cfg.module_hidden = 12;
    cfg.episodes = 256;
    cfg.k_controller = 128;
    cfg.k_modules = 64;
    cfg.minibatch = 64;
    cfg.ppo_epochs = 1;
    cfg.curriculum = false;
    cfg.max_len = 3;
    cfg.eval_every = 0;
    cfg.seed = 3;
    const TrainOutput out = train_run(cfg, ds, "");
    CHECK(!out.final_eval.empty());
    for (const EvalRow& row : out.final_eval) {
      CHECK(row.accuracy >= 0.0);
      CHECK(row.accuracy <= 1.0);
    }
  }
}

TEST_CASE("percentiles interpolate and collapse for one seed") {
  CHECK(percentile({0.0, 1.0}, 50.0) == doctest::Approx(0.5));
  CHECK(percentile({0.3}, 10.0) == doctest::Approx(0.3));
  CHECK(percentile({0.3}, 90.0) == doctest::Approx(0.3));
  std::vector<double> six = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  CHECK(percentile(six, 50.0) == doctest::Approx(0.35));
  CHECK(percentile(six, 10.0) == doctest::Approx(0.15));
  CHECK(percentile(six, 90.0) == doctest::Approx(0.55));

  std::vector<std::vector<EvalRow>> per_seed;
  for (std::uint64_t s = 0; s < 3; ++s) {
    EvalRow row;
    row.episodes = 100;
    row.split = "test";
    row.len = 5;
    row.seed = s;
    row.accuracy = 0.5 + 0.1 * static_cast<double>(s);
    per_seed.push_back({row});
  }
  const std::vector<AggregateRow> agg = aggregate_rows(per_seed);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].p50 == doctest::Approx(0.6));
}
