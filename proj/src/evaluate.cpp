#include "crl/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "crl/error.hpp"

namespace crl {

namespace {

std::vector<const ProblemInstance*> subsample_pool(const std::vector<ProblemInstance>& pool,
                                                   int subsample, std::uint64_t seed,
                                                   const PoolKey& key, int split_id) {
  std::vector<const ProblemInstance*> out;
  out.reserve(pool.size());
  for (const ProblemInstance& inst : pool) out.push_back(&inst);
  if (subsample > 0 && static_cast<int>(out.size()) > subsample) {
    SeededRng rng = SeededRng::stream(
        seed, "eval-subsample",
        static_cast<std::uint64_t>(key.len) * 10000 + static_cast<std::uint64_t>(key.src) * 100 +
            static_cast<std::uint64_t>(key.tgt) * 10 + static_cast<std::uint64_t>(split_id));
    rng.shuffle(std::span<const ProblemInstance*>(out));
    out.resize(static_cast<std::size_t>(subsample));
  }
  return out;
}

template <typename AccuracyFn>
std::vector<EvalRow> evaluate_pools(const Dataset& ds, const EvalOptions& opt,
                                    AccuracyFn accuracy) {
  std::vector<EvalRow> rows;
  auto emit = [&](const PoolKey& key, const std::vector<ProblemInstance>& pool,
                  const std::string& split, int split_id) {
    if (pool.empty()) return;
    if (opt.max_len > 0 && key.len > opt.max_len) return;
    const std::vector<const ProblemInstance*> sample =
        subsample_pool(pool, opt.subsample, opt.seed, key, split_id);
    EvalRow row;
    row.episodes = opt.episode_stamp;
    row.split = split;
    row.len = key.len;
    row.src = key.src;
    row.tgt = key.tgt;
    row.seed = opt.seed;
    row.accuracy = accuracy(sample);
    rows.push_back(std::move(row));
  };
  for (const auto& [key, split] : ds.pools) {
    if (opt.include_train) emit(key, split.train, "train", 0);
    if (opt.include_val) emit(key, split.val, "val", 1);
    if (opt.include_test) emit(key, split.test, "test", 2);
  }
  if (opt.include_heldout) {
    for (const auto& [key, pool] : ds.heldout) emit(key, pool, "heldout", 3);
  }
  return rows;
}

}  // namespace

double pool_accuracy_model(const RolloutPolicy& policy, const ModuleSet& mods,
                           const std::vector<const ProblemInstance*>& pool,
                           const Vocab& vocab, const HorizonMode& mode) {
  if (pool.empty()) return 0.0;
  RolloutPolicy greedy = policy;
  greedy.greedy = true;
  int correct = 0;
  SeededRng rng = SeededRng::stream(0, "eval-greedy");  // greedy never consumes draws
  for (const ProblemInstance* inst : pool) {
    const TraceRecord trace =
        run_episode(greedy, mods, *inst, vocab, mode, rng, CollectMode::EvalOnly);
    if (trace.terminal > 0.5) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pool.size());
}

double pool_accuracy_baseline(const BaselineParams& net,
                              const std::vector<const ProblemInstance*>& pool,
                              const Vocab& vocab) {
  if (pool.empty()) return 0.0;
  int correct = 0;
  for (const ProblemInstance* inst : pool) {
    const Tensor probs = baseline_forward(net, baseline_input(*inst, vocab));
    if (argmax_row(probs, 0) == inst->answer_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pool.size());
}

std::vector<EvalRow> evaluate_model(const RolloutPolicy& policy, const ModuleSet& mods,
                                    const Dataset& ds, const HorizonMode& mode,
                                    const EvalOptions& opt) {
  const Vocab vocab = ds.vocab();
  return evaluate_pools(ds, opt, [&](const std::vector<const ProblemInstance*>& pool) {
    return pool_accuracy_model(policy, mods, pool, vocab, mode);
  });
}

std::vector<EvalRow> evaluate_baseline(const BaselineParams& net, const Dataset& ds,
                                       const EvalOptions& opt) {
  const Vocab vocab = ds.vocab();
  return evaluate_pools(ds, opt, [&](const std::vector<const ProblemInstance*>& pool) {
    return pool_accuracy_baseline(net, pool, vocab);
  });
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path);
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) fail("io", "cannot write " + path);
  if (fresh) out << "episodes,split,length,src_lang,tgt_lang,seed,accuracy\n";
  char buf[64];
  for (const EvalRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", row.accuracy);
    out << row.episodes << "," << row.split << "," << row.len << "," << row.src << ","
        << row.tgt << "," << row.seed << "," << buf << "\n";
  }
}

std::vector<EvalRow> read_eval_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open " + path);
  std::vector<EvalRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    EvalRow row;
    std::string field;
    std::getline(ls, field, ',');
    row.episodes = std::stoll(field);
    std::getline(ls, row.split, ',');
    std::getline(ls, field, ',');
    row.len = std::stoi(field);
    std::getline(ls, field, ',');
    row.src = std::stoi(field);
    std::getline(ls, field, ',');
    row.tgt = std::stoi(field);
    std::getline(ls, field, ',');
    row.seed = std::stoull(field);
    std::getline(ls, field, ',');
    row.accuracy = std::stod(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) fail("internal", "percentile of empty set");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  const double frac = rank - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<AggregateRow> aggregate_rows(const std::vector<std::vector<EvalRow>>& per_seed) {
  // (episodes, split, len) -> per-seed list of pair-mean accuracies
  std::map<std::tuple<std::int64_t, std::string, int>, std::vector<double>> groups;
  for (const std::vector<EvalRow>& seed_rows : per_seed) {
    std::map<std::tuple<std::int64_t, std::string, int>, std::pair<double, int>> sums;
    for (const EvalRow& row : seed_rows) {
      auto& [sum, count] = sums[{row.episodes, row.split, row.len}];
      sum += row.accuracy;
      count += 1;
    }
    for (const auto& [key, sc] : sums) {
      groups[key].push_back(sc.first / sc.second);
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, values] : groups) {
    AggregateRow row;
    row.episodes = std::get<0>(key);
    row.split = std::get<1>(key);
    row.len = std::get<2>(key);
    row.p10 = percentile(values, 10.0);
    row.p50 = percentile(values, 50.0);
    row.p90 = percentile(values, 90.0);
    out.push_back(std::move(row));
  }
  return out;
}

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot write " + path);
  out << "episodes,split,length,p10,p50,p90\n";
  char buf[96];
  for (const AggregateRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f", row.p10, row.p50, row.p90);
    out << row.episodes << "," << row.split << "," << row.len << "," << buf << "\n";
  }
}

}  // namespace crl
