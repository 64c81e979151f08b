#pragma once

#include <string>
#include <vector>

#include "crl/controller.hpp"
#include "crl/dataset.hpp"
#include "crl/modules.hpp"
#include "crl/tensor.hpp"

namespace crl {

// Infinite-horizon runs end on HALT (or the step cap) and charge a penalty
// per computation step; bounded runs execute a fixed number of module
// applications and never consult HALT.
struct HorizonMode {
  bool bounded = false;
  int bounded_steps = 0;
  double step_penalty = -0.01;
  int step_cap = 0;  // 0 derives 2 * initial length + 10
  bool halt_noop = true;
};

struct EnvState {
  Tensor seq;
  Tensor target;  // 1 x 5 one-hot (multilingual) or empty
  int steps = 0;
  bool halted = false;
  int answer_id = 0;
  int step_cap = 0;
};

EnvState env_reset(const ProblemInstance& problem, const Vocab& vocab,
                   const HorizonMode& mode);

// 1 iff the final state is a single row whose argmax is the answer token.
double terminal_reward(const Tensor& seq, int answer_id);

enum class StepNote : std::uint8_t {
  Applied,
  Translated,
  TriedHalt,
  TriedReduce,
  Halted,
  CapForced,
};

struct StepOutcome {
  double reward = 0.0;
  bool done = false;
  StepNote note = StepNote::Applied;
  int produced_token = -1;
};

StepOutcome env_step(EnvState& state, const ModuleSet& mods, const ActionSample& action,
                     const HorizonMode& mode);

struct TraceStep {
  ActionSample action;
  double reward = 0.0;
  StepNote note = StepNote::Applied;
  std::vector<int> pre_tokens;
  int produced_token = -1;
  Tensor pre_state;  // populated only when collecting for training
};

// Full execution record of one episode.
struct TraceRecord {
  ProblemInstance problem;
  std::vector<TraceStep> steps;
  double terminal = 0.0;
  double total_return = 0.0;
  bool fully_reduced = false;
  int final_argmax = -1;
  Tensor final_dist;
};

struct RolloutPolicy {
  const ControllerParams* ctrl = nullptr;  // null selects the hardcoded controller
  bool greedy = false;
};

enum class CollectMode { EvalOnly, Training };

TraceRecord run_episode(const RolloutPolicy& policy, const ModuleSet& mods,
                        const ProblemInstance& problem, const Vocab& vocab,
                        const HorizonMode& mode, SeededRng& rng, CollectMode collect);

// One line per step in the appendix-trace style: argmax-decoded state with
// the acted-on window highlighted and an annotation, then END.
std::string render_trace(const TraceRecord& trace, const Vocab& vocab);

}  // namespace crl
