#include "crl/env.hpp"

#include "crl/error.hpp"
#include "crl/expression.hpp"

namespace crl {

EnvState env_reset(const ProblemInstance& problem, const Vocab& vocab,
                   const HorizonMode& mode) {
  EnvState s;
  s.seq = encode_onehot(problem.input_ids, vocab.width());
  if (vocab.multilingual()) {
    s.target = Tensor(1, vocab.languages);
    s.target.at(0, problem.tgt) = 1.0;
  }
  s.answer_id = problem.answer_id;
  s.step_cap = mode.step_cap > 0 ? mode.step_cap : 2 * s.seq.rows + 10;
  return s;
}

double terminal_reward(const Tensor& seq, int answer_id) {
  return (seq.rows == 1 && argmax_row(seq, 0) == answer_id) ? 1.0 : 0.0;
}

namespace {

// Replace rows [w, w+2] with one produced row.
Tensor splice_window(const Tensor& seq, int w, const Tensor& produced) {
  Tensor out(seq.rows - 2, seq.cols);
  int r_out = 0;
  for (int r = 0; r < seq.rows; ++r) {
    if (r == w) {
      for (int c = 0; c < seq.cols; ++c) out.at(r_out, c) = produced.at(0, c);
      ++r_out;
      r += 2;
      continue;
    }
    for (int c = 0; c < seq.cols; ++c) out.at(r_out, c) = seq.at(r, c);
    ++r_out;
  }
  return out;
}

Tensor window_rows(const Tensor& seq, int w) {
  Tensor win(3, seq.cols);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < seq.cols; ++c) win.at(r, c) = seq.at(w + r, c);
  }
  return win;
}

}  // namespace

StepOutcome env_step(EnvState& state, const ModuleSet& mods, const ActionSample& action,
                     const HorizonMode& mode) {
  if (state.halted) fail("internal", "step on a halted episode");
  StepOutcome out;
  switch (action.kind) {
    case ActionKind::Halt: {
      if (mode.bounded) fail("internal", "HALT is not consulted in bounded mode");
      if (state.seq.rows == 1 || !mode.halt_noop) {
        out.done = true;
        out.note = StepNote::Halted;
      } else {
        out.note = StepNote::TriedHalt;  // too early: no-op
      }
      break;
    }
    case ActionKind::Reduce: {
      if (action.module < 0 || action.module >= static_cast<int>(mods.reducers.size())) {
        fail("internal", "reduce action references reducer " + std::to_string(action.module));
      }
      if (state.seq.rows < 3 || action.window < 0 ||
          action.window + 2 >= state.seq.rows) {
        out.note = StepNote::TriedReduce;  // single token or no window: no-op
        break;
      }
      const Tensor win = window_rows(state.seq, action.window);
      const ReducerParams& r = mods.reducers[static_cast<std::size_t>(action.module)];
      Tensor produced;
      if (r.hardcoded) {
        if (!hardcoded_reduce(win, &produced)) {
          out.note = StepNote::TriedReduce;  // malformed window: no-op
          break;
        }
      } else {
        produced = reducer_apply(mods, action.module, win);
      }
      out.produced_token = argmax_row(produced, 0);
      state.seq = splice_window(state.seq, action.window, produced);
      out.note = StepNote::Applied;
      break;
    }
    case ActionKind::Translate: {
      if (action.module < 0 || action.module >= static_cast<int>(mods.translators.size())) {
        fail("internal", "translate action references translator " + std::to_string(action.module));
      }
      state.seq = translator_apply(mods, action.module, state.seq);
      out.note = StepNote::Translated;
      break;
    }
  }
  state.steps += 1;
  if (!mode.bounded) out.reward += mode.step_penalty;
  if (mode.bounded) {
    if (state.steps >= mode.bounded_steps) out.done = true;
  } else if (!out.done && state.steps >= state.step_cap) {
    out.done = true;
    out.note = StepNote::CapForced;
  }
  if (out.done) {
    state.halted = true;
    out.reward += terminal_reward(state.seq, state.answer_id);
  }
  return out;
}

TraceRecord run_episode(const RolloutPolicy& policy, const ModuleSet& mods,
                        const ProblemInstance& problem, const Vocab& vocab,
                        const HorizonMode& mode, SeededRng& rng, CollectMode collect) {
  EnvState state = env_reset(problem, vocab, mode);
  TraceRecord trace;
  trace.problem = problem;
  while (!state.halted) {
    TraceStep step;
    step.pre_tokens = argmax_tokens(state.seq);
    if (collect == CollectMode::Training) step.pre_state = state.seq;
    if (policy.ctrl) {
      const ControllerDists dists = controller_forward(*policy.ctrl, state.seq, state.target);
      step.action = sample_action(*policy.ctrl, dists, policy.greedy, rng);
    } else {
      step.action = hardcoded_controller_action(state.seq);
    }
    const StepOutcome outcome = env_step(state, mods, step.action, mode);
    step.reward = outcome.reward;
    step.note = outcome.note;
    step.produced_token = outcome.produced_token;
    trace.total_return += outcome.reward;
    trace.steps.push_back(std::move(step));
  }
  trace.terminal = terminal_reward(state.seq, state.answer_id);
  trace.fully_reduced = state.seq.rows == 1;
  if (trace.fully_reduced) {
    trace.final_argmax = argmax_row(state.seq, 0);
    trace.final_dist = state.seq;
  }
  return trace;
}

std::string render_trace(const TraceRecord& trace, const Vocab& vocab) {
  std::string out;
  for (const TraceStep& step : trace.steps) {
    int hl_begin = -1, hl_len = 0;
    if (step.note == StepNote::Applied) {
      hl_begin = step.action.window;
      hl_len = 3;
    }
    std::string line = render_tokens(step.pre_tokens, vocab, hl_begin, hl_len);
    if (line.size() < 46) line += std::string(46 - line.size(), ' ');
    line += "  # ";
    switch (step.note) {
      case StepNote::Applied: {
        const int w = step.action.window;
        line += token_text(step.pre_tokens[static_cast<std::size_t>(w)], vocab);
        line += " " + token_text(step.pre_tokens[static_cast<std::size_t>(w + 1)], vocab);
        line += " " + token_text(step.pre_tokens[static_cast<std::size_t>(w + 2)], vocab);
        line += " = " + token_text(step.produced_token, vocab);
        line += " (reducer " + std::to_string(step.action.module) + ")";
        break;
      }
      case StepNote::Translated:
        line += "translator " + std::to_string(step.action.module);
        break;
      case StepNote::TriedHalt:
        line += "tried to HALT";
        break;
      case StepNote::TriedReduce:
        line += "tried to REDUCE";
        break;
      case StepNote::Halted:
        line += "HALT";
        break;
      case StepNote::CapForced:
        line += "step cap";
        break;
    }
    out += line + "\n";
  }
  out += "END\n";
  return out;
}

}  // namespace crl
