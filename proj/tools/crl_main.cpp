// Command-line surface: dataset generation, training, evaluation, trace
// inspection, and CSV aggregation. See README.md for usage.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "crl/config.hpp"
#include "crl/dataset.hpp"
#include "crl/env.hpp"
#include "crl/error.hpp"
#include "crl/evaluate.hpp"
#include "crl/training.hpp"

namespace fs = std::filesystem;
using namespace crl;

namespace {

std::string default_out(const std::string& leaf) {
  const char* root = std::getenv("CRL_OUTPUT_ROOT");
  if (!root || !*root) {
    fail("config", "no --out given and CRL_OUTPUT_ROOT is not set");
  }
  return (fs::path(root) / leaf).string();
}

Dataset load_dataset_checked(const std::string& dir, const TrainConfig& cfg) {
  Dataset ds = load_dataset(dir);
  if (ds.task != cfg.task) {
    fail("vocab-mismatch", "dataset task " + ds.task + " does not match config task " + cfg.task);
  }
  if (ds.scale != cfg.data_scale) {
    fail("config", "dataset scale " + std::to_string(ds.scale) + " does not match data_scale " +
                       std::to_string(cfg.data_scale));
  }
  return ds;
}

int cmd_generate(const std::string& task, int scale, std::uint64_t seed, std::string out,
                 bool force) {
  if (out.empty()) out = default_out("dataset-" + task);
  const Dataset ds = task == "multilingual" ? build_multilingual_dataset(scale, seed)
                                            : build_numerical_dataset(scale, seed);
  save_dataset(ds, out, force);
  std::cout << "wrote " << ds.total_instances() << " instances to " << out << "\n";
  for (const std::string& note : ds.notes) std::cout << "note: " << note << "\n";
  return 0;
}

struct SeedRun {
  TrainConfig cfg;
  std::string dir;
  std::vector<EvalRow> final_eval;
  std::string error;
};

int cmd_train(const TrainConfig& base_cfg, const std::string& data_dir, std::string out,
              int seeds, int jobs) {
  if (out.empty()) out = default_out(base_cfg.model + "-" + base_cfg.task);
  const Dataset ds = load_dataset_checked(data_dir, base_cfg);
  fs::create_directories(out);

  std::vector<SeedRun> runs(static_cast<std::size_t>(seeds));
  for (int i = 0; i < seeds; ++i) {
    runs[static_cast<std::size_t>(i)].cfg = base_cfg;
    runs[static_cast<std::size_t>(i)].cfg.seed = base_cfg.seed + static_cast<std::uint64_t>(i);
    runs[static_cast<std::size_t>(i)].dir =
        (fs::path(out) / ("seed" + std::to_string(base_cfg.seed + static_cast<std::uint64_t>(i))))
            .string();
  }
  auto run_one = [&](SeedRun& run) {
    try {
      fs::create_directories(run.dir);
      write_config_file((fs::path(run.dir) / "config.txt").string(), config_to_pairs(run.cfg));
      run.final_eval = train_run(run.cfg, ds, run.dir).final_eval;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  };
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;
  std::size_t next = 0;
  while (next < runs.size()) {
    std::vector<std::thread> workers;
    for (int j = 0; j < jobs && next < runs.size(); ++j, ++next) {
      workers.emplace_back(run_one, std::ref(runs[next]));
    }
    for (std::thread& w : workers) w.join();
  }
  std::vector<std::vector<EvalRow>> per_seed;
  for (const SeedRun& run : runs) {
    if (!run.error.empty()) fail("train", "seed run failed: " + run.error);
    per_seed.push_back(run.final_eval);
    std::cout << "seed " << run.cfg.seed << " done -> " << run.dir << "\n";
  }
  write_aggregate_csv((fs::path(out) / "aggregate.csv").string(), aggregate_rows(per_seed));
  return 0;
}

std::vector<std::pair<int, int>> eval_pairs(const Dataset& ds, bool heldout_only) {
  if (heldout_only) {
    if (ds.heldout_pairs.empty()) fail("config", "dataset has no held-out pairs");
    return ds.heldout_pairs;
  }
  return ds.train_pairs;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, std::string out,
             const std::string& lengths, bool heldout_only, int samples,
             std::uint64_t seed) {
  if (out.empty()) out = default_out("eval.csv");
  const LoadedModel model = load_model(checkpoint);
  const Dataset ds = load_dataset_checked(data_dir, model.cfg);
  const Vocab vocab = ds.vocab();
  std::vector<EvalRow> rows;
  if (lengths.empty()) {
    EvalOptions opt;
    opt.episode_stamp = model.cfg.episodes;
    opt.seed = seed;
    if (heldout_only) {
      opt.include_train = opt.include_val = opt.include_test = false;
    }
    rows = model.cfg.model == "rnn"
               ? evaluate_baseline(model.baseline, ds, opt)
               : evaluate_model(RolloutPolicy{&model.ctrl, true}, model.mods, ds,
                                model.cfg.horizon(), opt);
  } else {
    int lo = 0, hi = 0, step = 1;
    const int got = std::sscanf(lengths.c_str(), "%d:%d:%d", &lo, &hi, &step);
    if (got < 1) fail("config", "bad --lengths: " + lengths);
    if (got < 2) hi = lo;
    if (step < 1) fail("config", "bad --lengths step");
    const std::vector<std::pair<int, int>> pairs = eval_pairs(ds, heldout_only);
    for (int len = lo; len <= hi; len += step) {
      const std::vector<ProblemInstance> pool = gen_extrapolation_set(len, pairs, samples, seed);
      std::vector<const ProblemInstance*> view;
      view.reserve(pool.size());
      for (const ProblemInstance& inst : pool) view.push_back(&inst);
      EvalRow row;
      row.episodes = model.cfg.episodes;
      row.split = "extrapolation";
      row.len = len;
      row.src = -1;
      row.tgt = -1;
      row.seed = seed;
      row.accuracy =
          model.cfg.model == "rnn"
              ? pool_accuracy_baseline(model.baseline, view, vocab)
              : pool_accuracy_model(RolloutPolicy{&model.ctrl, true}, model.mods, view, vocab,
                                    model.cfg.horizon());
      rows.push_back(row);
      std::cout << "length " << len << ": " << row.accuracy << "\n";
    }
  }
  write_eval_csv(out, rows, false);
  std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  return 0;
}

int cmd_trace(const std::string& checkpoint, const std::string& data_dir, std::string out,
              int count, std::uint64_t seed, const std::string& split, bool greedy) {
  if (out.empty()) out = default_out("traces.txt");
  const LoadedModel model = load_model(checkpoint);
  if (model.cfg.model == "rnn") fail("config", "traces require a crl-family checkpoint");
  const Dataset ds = load_dataset_checked(data_dir, model.cfg);
  const Vocab vocab = ds.vocab();

  std::vector<const ProblemInstance*> pool;
  for (const auto& [key, splits] : ds.pools) {
    const std::vector<ProblemInstance>& part =
        split == "train" ? splits.train : split == "val" ? splits.val : splits.test;
    for (const ProblemInstance& inst : part) pool.push_back(&inst);
  }
  if (split == "heldout") {
    pool.clear();
    for (const auto& [key, part] : ds.heldout) {
      for (const ProblemInstance& inst : part) pool.push_back(&inst);
    }
  }
  if (pool.empty()) fail("dataset", "empty trace pool for split " + split);

  std::ofstream file(out);
  if (!file) fail("io", "cannot write " + out);
  const RolloutPolicy policy{&model.ctrl, greedy};
  for (int i = 0; i < count; ++i) {
    SeededRng pick = SeededRng::stream(seed, "trace-pick", static_cast<std::uint64_t>(i));
    const ProblemInstance& problem =
        *pool[static_cast<std::size_t>(pick.uniform_int(static_cast<int>(pool.size())))];
    SeededRng action_rng = SeededRng::stream(seed, "trace-action", static_cast<std::uint64_t>(i));
    const TraceRecord trace = run_episode(policy, model.mods, problem, vocab,
                                          model.cfg.horizon(), action_rng, CollectMode::EvalOnly);
    file << "# trace " << i << " seed=" << seed << " len=" << problem.terms
         << " src=" << problem.src << " tgt=" << problem.tgt << " answer=" << problem.answer_id
         << " return=" << trace.total_return << "\n";
    file << render_trace(trace, vocab) << "\n";
  }
  std::cout << "wrote " << count << " traces to " << out << "\n";
  return 0;
}

int cmd_export(const std::string& run_dir, std::string out) {
  if (out.empty()) out = default_out("aggregate.csv");
  std::vector<std::vector<EvalRow>> per_seed;
  ConfigPairs reference;
  std::string reference_dir;
  std::vector<fs::path> seed_dirs;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    if (entry.is_directory() && entry.path().filename().string().rfind("seed", 0) == 0) {
      seed_dirs.push_back(entry.path());
    }
  }
  std::sort(seed_dirs.begin(), seed_dirs.end());
  for (const fs::path& dir : seed_dirs) {
    const fs::path cfg_path = dir / "config.txt";
    const fs::path csv_path = dir / "eval.csv";
    if (!fs::exists(cfg_path) || !fs::exists(csv_path)) continue;
    ConfigPairs pairs = read_config_file(cfg_path.string());
    std::erase_if(pairs, [](const auto& kv) { return kv.first == "seed"; });
    if (reference.empty()) {
      reference = pairs;
      reference_dir = dir.string();
    } else if (pairs != reference) {
      fail("inconsistent-configs",
           dir.string() + " differs from " + reference_dir + " beyond the seed");
    }
    per_seed.push_back(read_eval_csv(csv_path.string()));
  }
  if (per_seed.empty()) fail("dataset-missing", "no seed runs under " + run_dir);
  write_aggregate_csv(out, aggregate_rows(per_seed));
  std::cout << "aggregated " << per_seed.size() << " seed runs to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compositional recursive learner: modular arithmetic tasks"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Build a dataset with manifest");
  std::string gen_task = "numerical";
  int gen_scale = 1;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  bool gen_force = false;
  gen->add_option("--task", gen_task)->check(CLI::IsMember({"numerical", "multilingual"}));
  gen->add_option("--scale", gen_scale)->check(CLI::IsMember({1, 10}));
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out);
  gen->add_flag("--force", gen_force);

  // train
  auto* train = app.add_subcommand("train", "Train a model; one run per seed");
  std::string train_config, train_data, train_out;
  std::vector<std::string> train_sets;
  std::string train_task, train_model;
  std::int64_t train_episodes = -1;
  std::uint64_t train_seed = 0;
  bool train_seed_given = false;
  bool no_curriculum = false;
  int train_seeds = 1, train_jobs = 0, train_data_scale = 0;
  train->add_option("--config", train_config, "key = value file");
  train->add_option("--data", train_data)->required();
  train->add_option("--out", train_out);
  train->add_option("--set", train_sets, "override: key=value")->take_all();
  train->add_option("--task", train_task);
  train->add_option("--model", train_model);
  train->add_option("--episodes", train_episodes);
  train->add_option("--data-scale", train_data_scale);
  train->add_option("--seed", train_seed)->each([&](const std::string&) { train_seed_given = true; });
  train->add_flag("--no-curriculum", no_curriculum);
  train->add_option("--seeds", train_seeds, "independent runs with consecutive seeds");
  train->add_option("--jobs", train_jobs, "concurrent seed runs (0 = hardware)");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_out, ev_lengths;
  bool ev_heldout = false;
  int ev_samples = 100;
  std::uint64_t ev_seed = 0;
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--out", ev_out);
  ev->add_option("--lengths", ev_lengths, "extrapolation sweep lo[:hi[:step]]");
  ev->add_flag("--heldout-only", ev_heldout);
  ev->add_option("--samples", ev_samples, "instances per (length, pair)");
  ev->add_option("--seed", ev_seed);

  // trace
  auto* tr = app.add_subcommand("trace", "Render execution traces");
  std::string tr_ckpt, tr_data, tr_out, tr_split = "test";
  int tr_count = 10;
  std::uint64_t tr_seed = 0;
  bool tr_greedy = false;
  tr->add_option("--checkpoint", tr_ckpt)->required();
  tr->add_option("--data", tr_data)->required();
  tr->add_option("--out", tr_out);
  tr->add_option("-n,--count", tr_count);
  tr->add_option("--seed", tr_seed);
  tr->add_option("--split", tr_split)->check(CLI::IsMember({"train", "val", "test", "heldout"}));
  tr->add_flag("--greedy", tr_greedy);

  // export
  auto* ex = app.add_subcommand("export", "Aggregate seed runs into percentile CSV");
  std::string ex_run, ex_out;
  ex->add_option("--run", ex_run)->required();
  ex->add_option("--out", ex_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_task, gen_scale, gen_seed, gen_out, gen_force);
    if (train->parsed()) {
      TrainConfig cfg;
      if (!train_config.empty()) {
        for (const auto& [k, v] : read_config_file(train_config)) apply_config_kv(cfg, k, v);
      }
      if (!train_task.empty()) apply_config_kv(cfg, "task", train_task);
      if (!train_model.empty()) apply_config_kv(cfg, "model", train_model);
      if (train_episodes >= 0) cfg.episodes = train_episodes;
      if (train_data_scale > 0) cfg.data_scale = train_data_scale;
      if (train_seed_given) cfg.seed = train_seed;
      if (no_curriculum) cfg.curriculum = false;
      for (const std::string& kv : train_sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail("config", "--set expects key=value, got " + kv);
        apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      }
      return cmd_train(cfg, train_data, train_out, train_seeds, train_jobs);
    }
    if (ev->parsed()) {
      return cmd_eval(ev_ckpt, ev_data, ev_out, ev_lengths, ev_heldout, ev_samples, ev_seed);
    }
    if (tr->parsed()) {
      return cmd_trace(tr_ckpt, tr_data, tr_out, tr_count, tr_seed, tr_split, tr_greedy);
    }
    if (ex->parsed()) return cmd_export(ex_run, ex_out);
  } catch (const CrlError& e) {
    std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
