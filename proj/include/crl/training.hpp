#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crl/baseline.hpp"
#include "crl/controller.hpp"
#include "crl/dataset.hpp"
#include "crl/env.hpp"
#include "crl/evaluate.hpp"
#include "crl/modules.hpp"

namespace crl {

struct TrainConfig {
  std::string task = "numerical";  // numerical | multilingual
  std::string model = "crl";       // crl | rnn | hcc | hcf
  int data_scale = 1;

  int reducers = 1;
  int translators = 0;
  int module_hidden = 128;

  int controller_hidden = 64;
  bool shared_encoder = true;

  bool bounded = false;
  int bounded_steps = 0;
  double step_penalty = -0.01;
  bool halt_noop = true;
  int step_cap = 0;

  std::int64_t episodes = 1000000;
  int k_controller = 1024;  // episodes per controller update
  int k_modules = 256;      // episodes per module update
  double clip = 0.2;
  int ppo_epochs = 4;
  int minibatch = 256;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double lr_controller = 3e-4;
  double lr_modules = 1e-3;

  bool curriculum = true;
  std::int64_t curriculum_cadence = 0;  // 0 resolves per model (1e5, rnn 5e4)
  int min_len = 2;
  int max_len = 0;  // 0 resolves per task (numerical 10, multilingual 5)

  int baseline_hidden = 64;
  int baseline_batch = 64;
  double lr_baseline = 1e-3;

  std::uint64_t seed = 0;
  std::int64_t eval_every = 10000;
  std::int64_t checkpoint_every = 0;
  int eval_subsample = 200;

  HorizonMode horizon() const {
    return HorizonMode{bounded, bounded_steps, step_penalty, step_cap, halt_noop};
  }
  std::int64_t resolved_cadence() const {
    if (curriculum_cadence > 0) return curriculum_cadence;
    return model == "rnn" ? 50000 : 100000;
  }
  int resolved_max_len() const {
    if (max_len > 0) return max_len;
    return task == "multilingual" ? 5 : 10;
  }
  Curriculum make_curriculum() const {
    return Curriculum{curriculum, min_len, resolved_max_len(), resolved_cadence()};
  }
  bool crl_family() const { return model != "rnn"; }
};

// Episodes gathered since the last controller update, with per-step
// (log-prob, value, entropy) snapshots inside the traces.
struct RolloutBuffer {
  std::vector<TraceRecord> traces;

  void clear() { traces.clear(); }
  std::int64_t step_count() const;
};

// Deterministic given (seed, episode index); episode i samples its problem
// and its actions from streams keyed by the global episode counter.
void collect_rollouts(RolloutBuffer& buffer, int n, const RolloutPolicy& policy,
                      const ModuleSet& mods,
                      const std::vector<const ProblemInstance*>& pool, const Vocab& vocab,
                      const HorizonMode& mode, std::uint64_t seed,
                      std::int64_t episode_base, CollectMode collect);

struct StepRef {
  const TraceRecord* trace = nullptr;
  int step = 0;
  double ret = 0.0;  // undiscounted return-to-go
  double adv = 0.0;  // ret minus the rollout value snapshot
};

std::vector<StepRef> flatten_with_returns(const RolloutBuffer& buffer);

struct SurrogateSettings {
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
};

// Gradient of the clipped-surrogate loss (mean over the given steps) at the
// current parameters. Exposed separately so the degenerate configuration can
// be checked against a plain policy-gradient computation.
std::vector<Tensor> surrogate_gradient(const ControllerParams& ctrl,
                                       std::span<const StepRef> steps,
                                       const SurrogateSettings& settings,
                                       double* loss_out = nullptr);

// Clipped-surrogate PPO over the buffer; several epochs of shuffled
// minibatches. Returns false when a non-finite loss aborted the update
// (parameters and optimizer state are restored).
bool controller_update(ControllerParams& ctrl, AdamState& adam,
                       const RolloutBuffer& buffer, const TrainConfig& cfg,
                       std::uint64_t update_index);

// Supervised consolidation: recompute forward chains of fully reduced
// episodes with current module parameters, mean answer NLL, one Adam step.
// Returns the number of eligible episodes (0 means the update was skipped).
int module_update(ModuleSet& mods, AdamState& adam, std::span<const TraceRecord> episodes,
                  const Vocab& vocab, double* loss_out = nullptr);

// Recompute a trace's forward chain with current module parameters; returns
// the final distribution node value (for the fidelity property) or an empty
// tensor if the trace never fully reduced.
Tensor recompute_final_distribution(const ModuleSet& mods, const TraceRecord& trace,
                                    const Vocab& vocab);

struct TrainOutput {
  std::vector<EvalRow> final_eval;
  std::string checkpoint_path;
  std::int64_t all_data_episode = 0;
};

// Full training run for any model kind; writes eval.csv, curriculum.csv and
// checkpoints under out_dir. An empty out_dir suppresses file output.
TrainOutput train_run(const TrainConfig& cfg, const Dataset& ds, const std::string& out_dir);

// Checkpoint packing for the CLI and tests.
Checkpoint make_checkpoint(const TrainConfig& cfg, const ControllerParams* ctrl,
                           const ModuleSet* mods, const BaselineParams* baseline);

struct LoadedModel {
  TrainConfig cfg;
  ControllerParams ctrl;
  ModuleSet mods;
  BaselineParams baseline;
};

LoadedModel load_model(const std::string& checkpoint_path);

}  // namespace crl
