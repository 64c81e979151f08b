#include "crl/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "crl/config.hpp"
#include "crl/error.hpp"
#include "crl/expression.hpp"

namespace fs = std::filesystem;

namespace crl {

std::int64_t RolloutBuffer::step_count() const {
  std::int64_t n = 0;
  for (const TraceRecord& t : traces) n += static_cast<std::int64_t>(t.steps.size());
  return n;
}

namespace {

Tensor target_onehot(const ProblemInstance& problem, int target_dim) {
  if (target_dim == 0) return Tensor();
  Tensor t(1, target_dim);
  t.at(0, problem.tgt) = 1.0;
  return t;
}

}  // namespace

void collect_rollouts(RolloutBuffer& buffer, int n, const RolloutPolicy& policy,
                      const ModuleSet& mods,
                      const std::vector<const ProblemInstance*>& pool, const Vocab& vocab,
                      const HorizonMode& mode, std::uint64_t seed,
                      std::int64_t episode_base, CollectMode collect) {
  if (pool.empty()) fail("internal", "rollout from an empty pool");
  for (int i = 0; i < n; ++i) {
    const std::uint64_t ep = static_cast<std::uint64_t>(episode_base + i);
    SeededRng problem_rng = SeededRng::stream(seed, "problem", ep);
    const ProblemInstance& problem =
        *pool[static_cast<std::size_t>(problem_rng.uniform_int(static_cast<int>(pool.size())))];
    SeededRng action_rng = SeededRng::stream(seed, "action", ep);
    buffer.traces.push_back(
        run_episode(policy, mods, problem, vocab, mode, action_rng, collect));
  }
}

std::vector<StepRef> flatten_with_returns(const RolloutBuffer& buffer) {
  std::vector<StepRef> out;
  out.reserve(static_cast<std::size_t>(buffer.step_count()));
  for (const TraceRecord& trace : buffer.traces) {
    double g = 0.0;
    std::vector<double> returns(trace.steps.size());
    for (int t = static_cast<int>(trace.steps.size()) - 1; t >= 0; --t) {
      g += trace.steps[static_cast<std::size_t>(t)].reward;
      returns[static_cast<std::size_t>(t)] = g;
    }
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      StepRef ref;
      ref.trace = &trace;
      ref.step = static_cast<int>(t);
      ref.ret = returns[t];
      ref.adv = returns[t] - trace.steps[t].action.value;
      out.push_back(ref);
    }
  }
  return out;
}

std::vector<Tensor> surrogate_gradient(const ControllerParams& ctrl,
                                       std::span<const StepRef> steps,
                                       const SurrogateSettings& settings,
                                       double* loss_out) {
  if (steps.empty()) fail("internal", "surrogate gradient over zero steps");
  Tape tape;
  tape.reserve(steps.size() * 220);
  const TapeParams tp = push_params(tape, ctrl.params);
  const double inv = 1.0 / static_cast<double>(steps.size());
  int loss = -1;
  for (const StepRef& ref : steps) {
    const TraceStep& ts = ref.trace->steps[static_cast<std::size_t>(ref.step)];
    if (ts.pre_state.empty()) fail("internal", "buffer trace lacks state snapshots");
    const Tensor target = target_onehot(ref.trace->problem, ctrl.cfg.target_dim);
    const ControllerEvalNodes nodes =
        controller_eval_tape(tape, tp, ctrl, ts.pre_state, target, ts.action);

    // Ratio and clip branch from node values; the surviving branch enters the
    // loss as coeff * logp, whose gradient equals the clipped surrogate's.
    const double ratio = std::exp(tape.scalar(nodes.logp) - ts.action.logp);
    const bool clipped_out = (ref.adv > 0.0 && ratio > 1.0 + settings.clip) ||
                             (ref.adv < 0.0 && ratio < 1.0 - settings.clip);
    const double coeff = clipped_out ? 0.0 : ratio * ref.adv;

    int term = tape.scale(nodes.logp, -coeff * inv);
    const int diff = tape.add(nodes.value, tape.leaf(Tensor(1, 1, {-ref.ret})));
    term = tape.add(term, tape.scale(tape.mul(diff, diff), settings.value_coef * inv));
    if (settings.entropy_coef != 0.0) {
      term = tape.add(term, tape.scale(nodes.entropy, -settings.entropy_coef * inv));
    }
    loss = loss < 0 ? term : tape.add(loss, term);
  }
  if (loss_out) *loss_out = tape.scalar(loss);
  return tape.param_grads(loss, ctrl.params.count());
}

bool controller_update(ControllerParams& ctrl, AdamState& adam,
                       const RolloutBuffer& buffer, const TrainConfig& cfg,
                       std::uint64_t update_index) {
  const std::vector<StepRef> steps = flatten_with_returns(buffer);
  if (steps.empty()) return true;
  const std::vector<Tensor> params_backup = ctrl.params.values;
  const AdamState adam_backup = adam;
  const SurrogateSettings settings{cfg.clip, cfg.entropy_coef, cfg.value_coef};
  try {
    std::vector<std::size_t> order(steps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
      SeededRng shuffle_rng = SeededRng::stream(
          cfg.seed, "ppo-shuffle", update_index * 131 + static_cast<std::uint64_t>(epoch));
      shuffle_rng.shuffle(std::span<std::size_t>(order));
      const std::size_t mb = cfg.minibatch > 0 ? static_cast<std::size_t>(cfg.minibatch)
                                               : steps.size();
      for (std::size_t at = 0; at < order.size(); at += mb) {
        const std::size_t end = std::min(at + mb, order.size());
        std::vector<StepRef> batch;
        batch.reserve(end - at);
        for (std::size_t i = at; i < end; ++i) batch.push_back(steps[order[i]]);
        double loss = 0.0;
        const std::vector<Tensor> grads = surrogate_gradient(ctrl, batch, settings, &loss);
        if (!std::isfinite(loss)) fail("non-finite", "controller loss");
        adam_step(ctrl.params, grads, adam);
      }
    }
    return true;
  } catch (const CrlError&) {
    ctrl.params.values = params_backup;
    adam = adam_backup;
    return false;
  }
}

namespace {

// Replays a trace's effective steps over per-row tape nodes with the current
// module parameters; returns the final single-row node or -1.
int replay_chain_tape(Tape& tape, const TapeParams& tp, const ModuleSet& mods,
                      const TraceRecord& trace, const Vocab& vocab) {
  const Tensor input = encode_onehot(trace.problem.input_ids, vocab.width());
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(input.rows));
  for (int r = 0; r < input.rows; ++r) rows.push_back(tape.leaf(row_of(input, r)));
  for (const TraceStep& step : trace.steps) {
    if (step.note == StepNote::Applied) {
      const int w = step.action.window;
      const int produced = reducer_apply_tape(tape, tp, mods, step.action.module, rows[static_cast<std::size_t>(w)],
                                              rows[static_cast<std::size_t>(w + 1)], rows[static_cast<std::size_t>(w + 2)]);
      rows.erase(rows.begin() + w, rows.begin() + w + 3);
      rows.insert(rows.begin() + w, produced);
    } else if (step.note == StepNote::Translated) {
      for (int& row : rows) {
        row = translator_row_tape(tape, tp, mods, step.action.module, row);
      }
    }
  }
  return rows.size() == 1 ? rows[0] : -1;
}

}  // namespace

int module_update(ModuleSet& mods, AdamState& adam, std::span<const TraceRecord> episodes,
                  const Vocab& vocab, double* loss_out) {
  if (!mods.learned()) return 0;
  int eligible = 0;
  for (const TraceRecord& trace : episodes) {
    if (trace.fully_reduced) ++eligible;
  }
  if (eligible == 0) return 0;
  const std::vector<Tensor> params_backup = mods.params.values;
  const AdamState adam_backup = adam;
  try {
    Tape tape;
    tape.reserve(static_cast<std::size_t>(eligible) * 96);
    const TapeParams tp = push_params(tape, mods.params);
    const double inv = 1.0 / static_cast<double>(eligible);
    int loss = -1;
    for (const TraceRecord& trace : episodes) {
      if (!trace.fully_reduced) continue;
      const int final_row = replay_chain_tape(tape, tp, mods, trace, vocab);
      if (final_row < 0) fail("internal", "fully reduced trace did not replay to one row");
      Tensor onehot(1, vocab.width());
      onehot.at(0, trace.problem.answer_id) = 1.0;
      const int nll = tape.nll(final_row, tape.leaf(std::move(onehot)));
      const int term = tape.scale(nll, inv);
      loss = loss < 0 ? term : tape.add(loss, term);
    }
    if (loss_out) *loss_out = tape.scalar(loss);
    const std::vector<Tensor> grads = tape.param_grads(loss, mods.params.count());
    adam_step(mods.params, grads, adam);
    return eligible;
  } catch (const CrlError&) {
    mods.params.values = params_backup;
    adam = adam_backup;
    return 0;
  }
}

Tensor recompute_final_distribution(const ModuleSet& mods, const TraceRecord& trace,
                                    const Vocab& vocab) {
  Tape tape;
  TapeParams tp;
  if (mods.learned()) tp = push_params(tape, mods.params);
  const int final_row = replay_chain_tape(tape, tp, mods, trace, vocab);
  if (final_row < 0) return Tensor();
  return tape.value(final_row);
}

// --- checkpoints --------------------------------------------------------------

Checkpoint make_checkpoint(const TrainConfig& cfg, const ControllerParams* ctrl,
                           const ModuleSet* mods, const BaselineParams* baseline) {
  Checkpoint ckpt;
  ckpt.meta = config_to_pairs(cfg);
  auto append = [&](const ParamSet& set) {
    for (int id = 0; id < set.count(); ++id) {
      ckpt.params.add(set.names[static_cast<std::size_t>(id)], set[id]);
    }
  };
  if (ctrl) append(ctrl->params);
  if (mods) append(mods->params);
  if (baseline) append(baseline->params);
  return ckpt;
}

namespace {

void copy_named_params(ParamSet& dst, const ParamSet& src) {
  for (int id = 0; id < dst.count(); ++id) {
    const std::string& name = dst.names[static_cast<std::size_t>(id)];
    const int sid = src.find(name);
    if (sid < 0) fail("checkpoint", "checkpoint missing parameter " + name);
    if (!src[sid].same_shape(dst[id])) {
      fail("vocab-mismatch", "parameter " + name + " has shape " + src[sid].shape_str() +
                                 ", expected " + dst[id].shape_str());
    }
    dst[id] = src[sid];
  }
}

ControllerConfig controller_config_for(const TrainConfig& cfg, const Vocab& vocab) {
  ControllerConfig cc;
  cc.vocab_width = vocab.width();
  cc.target_dim = vocab.multilingual() ? vocab.languages : 0;
  cc.hidden = cfg.controller_hidden;
  cc.reducers = cfg.reducers;
  cc.translators = cfg.translators;
  cc.allow_halt = !cfg.bounded;
  cc.shared_encoder = cfg.shared_encoder;
  cc.operator_windows = cfg.model == "hcf";
  return cc;
}

ModuleConfig module_config_for(const TrainConfig& cfg, const Vocab& vocab) {
  ModuleConfig mc;
  mc.vocab_width = vocab.width();
  mc.reducers = cfg.reducers;
  mc.translators = cfg.translators;
  mc.hidden = cfg.module_hidden;
  mc.hardcoded_reducers = cfg.model == "hcf";
  return mc;
}

}  // namespace

LoadedModel load_model(const std::string& checkpoint_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  LoadedModel out;
  out.cfg = config_from_pairs(ckpt.meta);
  const Vocab vocab{out.cfg.task == "multilingual" ? 5 : 1};
  SeededRng rng(0);
  if (out.cfg.model == "rnn") {
    out.baseline = init_baseline(BaselineConfig{vocab.languages, out.cfg.baseline_hidden}, rng);
    copy_named_params(out.baseline.params, ckpt.params);
  } else {
    out.ctrl = init_controller(controller_config_for(out.cfg, vocab), rng);
    copy_named_params(out.ctrl.params, ckpt.params);
    out.mods = init_module_set(module_config_for(out.cfg, vocab), rng);
    copy_named_params(out.mods.params, ckpt.params);
  }
  return out;
}

// --- full training runs --------------------------------------------------------

namespace {

struct RunFiles {
  bool enabled = false;
  std::string eval_csv;
  std::string curriculum_csv;
  std::string dir;

  void init(const std::string& out_dir) {
    if (out_dir.empty()) return;
    enabled = true;
    dir = out_dir;
    fs::create_directories(out_dir);
    eval_csv = (fs::path(out_dir) / "eval.csv").string();
    curriculum_csv = (fs::path(out_dir) / "curriculum.csv").string();
    std::ofstream(eval_csv) << "episodes,split,length,src_lang,tgt_lang,seed,accuracy\n";
    std::ofstream(curriculum_csv) << "episodes,stage,max_len\n";
  }

  void log_stage(std::int64_t episodes, int stage, int max_len) const {
    if (!enabled) return;
    std::ofstream out(curriculum_csv, std::ios::app);
    out << episodes << "," << stage << "," << max_len << "\n";
  }

  void append_eval(const std::vector<EvalRow>& rows) const {
    if (!enabled || rows.empty()) return;
    write_eval_csv(eval_csv, rows, true);
  }
};

EvalOptions eval_options(const TrainConfig& cfg, std::int64_t stamp, bool final_eval,
                         int max_len) {
  EvalOptions opt;
  opt.episode_stamp = stamp;
  opt.seed = cfg.seed;
  opt.subsample = final_eval ? 0 : cfg.eval_subsample;
  opt.max_len = max_len;
  return opt;
}

TrainOutput train_crl_family(const TrainConfig& cfg, const Dataset& ds,
                             const std::string& out_dir) {
  const Vocab vocab = ds.vocab();
  const HorizonMode horizon = cfg.horizon();
  const Curriculum curriculum = cfg.make_curriculum();
  RunFiles files;
  files.init(out_dir);

  SeededRng init_rng = SeededRng::stream(cfg.seed, "init");
  ControllerParams ctrl = init_controller(controller_config_for(cfg, vocab), init_rng);
  ModuleSet mods = init_module_set(module_config_for(cfg, vocab), init_rng);
  AdamState adam_ctrl;
  adam_ctrl.lr = cfg.lr_controller;
  AdamState adam_mods;
  adam_mods.lr = cfg.lr_modules;

  const RolloutPolicy policy{cfg.model == "hcc" ? nullptr : &ctrl, false};
  const bool train_controller = cfg.model == "crl" || cfg.model == "hcf";
  const bool train_modules = mods.learned() && (cfg.model == "crl" || cfg.model == "hcc");

  RolloutBuffer ppo_buffer;
  std::vector<TraceRecord> module_batch;
  std::uint64_t update_index = 0;

  std::int64_t episode = 0;
  int pool_len = -1;
  std::vector<const ProblemInstance*> pool;
  files.log_stage(0, curriculum.stage_at(0), curriculum.max_len_at(0));

  auto run_eval = [&](std::int64_t stamp, bool final_eval) {
    const EvalOptions opt = eval_options(cfg, stamp, final_eval, 0);
    return evaluate_model(policy, mods, ds, horizon, opt);
  };
  auto save_ckpt = [&](const std::string& name) {
    if (!files.enabled) return std::string();
    const std::string path = (fs::path(files.dir) / name).string();
    save_checkpoint(path, make_checkpoint(cfg, &ctrl, &mods, nullptr));
    return path;
  };

  while (episode < cfg.episodes) {
    const int max_len = curriculum.max_len_at(episode);
    if (max_len != pool_len) {
      pool = ds.curriculum_pool(max_len);
      if (pool_len >= 0) files.log_stage(episode, curriculum.stage_at(episode), max_len);
      pool_len = max_len;
    }
    // Chunks never straddle a stage boundary, an eval stamp, or the horizon.
    std::int64_t chunk = std::min<std::int64_t>(cfg.k_modules, cfg.episodes - episode);
    if (cfg.curriculum) {
      const std::int64_t boundary =
          (episode / curriculum.cadence + 1) * curriculum.cadence;
      chunk = std::min(chunk, boundary - episode);
    }
    if (cfg.eval_every > 0) {
      const std::int64_t stamp = (episode / cfg.eval_every + 1) * cfg.eval_every;
      chunk = std::min(chunk, stamp - episode);
    }

    collect_rollouts(ppo_buffer, static_cast<int>(chunk), policy, mods, pool, vocab,
                     horizon, cfg.seed, episode, CollectMode::Training);
    for (std::size_t i = ppo_buffer.traces.size() - static_cast<std::size_t>(chunk);
         i < ppo_buffer.traces.size(); ++i) {
      module_batch.push_back(ppo_buffer.traces[i]);
    }
    episode += chunk;

    if (train_modules && static_cast<int>(module_batch.size()) >= cfg.k_modules) {
      module_update(mods, adam_mods, module_batch, vocab);
      module_batch.clear();
    } else if (!train_modules) {
      module_batch.clear();
    }
    if (train_controller && ppo_buffer.step_count() > 0 &&
        static_cast<int>(ppo_buffer.traces.size()) >= cfg.k_controller) {
      controller_update(ctrl, adam_ctrl, ppo_buffer, cfg, update_index++);
      ppo_buffer.clear();
    } else if (!train_controller) {
      ppo_buffer.clear();
    }

    if (cfg.eval_every > 0 && episode % cfg.eval_every == 0 && episode < cfg.episodes) {
      files.append_eval(run_eval(episode, false));
    }
    if (cfg.checkpoint_every > 0 && episode % cfg.checkpoint_every == 0 &&
        episode < cfg.episodes) {
      save_ckpt("checkpoint_" + std::to_string(episode) + ".txt");
    }
  }

  TrainOutput out;
  out.final_eval = run_eval(cfg.episodes, true);
  files.append_eval(out.final_eval);
  out.checkpoint_path = save_ckpt("checkpoint_final.txt");
  out.all_data_episode = curriculum.all_data_episode();
  if (files.enabled) {
    std::ofstream run_file(fs::path(files.dir) / "run.txt");
    run_file << "episodes " << cfg.episodes << "\n";
    run_file << "all_data_episode " << out.all_data_episode << "\n";
  }
  return out;
}

TrainOutput train_rnn(const TrainConfig& cfg, const Dataset& ds, const std::string& out_dir) {
  const Vocab vocab = ds.vocab();
  const Curriculum curriculum = cfg.make_curriculum();
  RunFiles files;
  files.init(out_dir);

  SeededRng init_rng = SeededRng::stream(cfg.seed, "init");
  BaselineParams net = init_baseline(BaselineConfig{vocab.languages, cfg.baseline_hidden}, init_rng);
  AdamState adam;
  adam.lr = cfg.lr_baseline;

  std::int64_t episode = 0;
  int pool_len = -1;
  std::vector<const ProblemInstance*> pool;
  files.log_stage(0, curriculum.stage_at(0), curriculum.max_len_at(0));

  auto run_eval = [&](std::int64_t stamp, bool final_eval) {
    const EvalOptions opt = eval_options(cfg, stamp, final_eval, 0);
    return evaluate_baseline(net, ds, opt);
  };
  auto save_ckpt = [&](const std::string& name) {
    if (!files.enabled) return std::string();
    const std::string path = (fs::path(files.dir) / name).string();
    save_checkpoint(path, make_checkpoint(cfg, nullptr, nullptr, &net));
    return path;
  };

  while (episode < cfg.episodes) {
    const int max_len = curriculum.max_len_at(episode);
    if (max_len != pool_len) {
      pool = ds.curriculum_pool(max_len);
      if (pool_len >= 0) files.log_stage(episode, curriculum.stage_at(episode), max_len);
      pool_len = max_len;
    }
    std::int64_t chunk = std::min<std::int64_t>(cfg.baseline_batch, cfg.episodes - episode);
    if (cfg.curriculum) {
      const std::int64_t boundary =
          (episode / curriculum.cadence + 1) * curriculum.cadence;
      chunk = std::min(chunk, boundary - episode);
    }
    if (cfg.eval_every > 0) {
      const std::int64_t stamp = (episode / cfg.eval_every + 1) * cfg.eval_every;
      chunk = std::min(chunk, stamp - episode);
    }
    std::vector<const ProblemInstance*> batch;
    batch.reserve(static_cast<std::size_t>(chunk));
    for (std::int64_t i = 0; i < chunk; ++i) {
      SeededRng problem_rng =
          SeededRng::stream(cfg.seed, "problem", static_cast<std::uint64_t>(episode + i));
      batch.push_back(pool[static_cast<std::size_t>(
          problem_rng.uniform_int(static_cast<int>(pool.size())))]);
    }
    baseline_update(net, adam, batch, vocab);
    episode += chunk;

    if (cfg.eval_every > 0 && episode % cfg.eval_every == 0 && episode < cfg.episodes) {
      files.append_eval(run_eval(episode, false));
    }
    if (cfg.checkpoint_every > 0 && episode % cfg.checkpoint_every == 0 &&
        episode < cfg.episodes) {
      save_ckpt("checkpoint_" + std::to_string(episode) + ".txt");
    }
  }

  TrainOutput out;
  out.final_eval = run_eval(cfg.episodes, true);
  files.append_eval(out.final_eval);
  out.checkpoint_path = save_ckpt("checkpoint_final.txt");
  out.all_data_episode = curriculum.all_data_episode();
  if (files.enabled) {
    std::ofstream run_file(fs::path(files.dir) / "run.txt");
    run_file << "episodes " << cfg.episodes << "\n";
    run_file << "all_data_episode " << out.all_data_episode << "\n";
  }
  return out;
}

}  // namespace

TrainOutput train_run(const TrainConfig& cfg, const Dataset& ds, const std::string& out_dir) {
  if (cfg.task != ds.task) {
    fail("vocab-mismatch", "config task " + cfg.task + " vs dataset task " + ds.task);
  }
  if (cfg.model == "rnn") return train_rnn(cfg, ds, out_dir);
  if (cfg.model == "crl" || cfg.model == "hcc" || cfg.model == "hcf") {
    return train_crl_family(cfg, ds, out_dir);
  }
  fail("config", "unknown model: " + cfg.model);
}

}  // namespace crl
