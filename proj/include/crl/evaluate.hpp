#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crl/baseline.hpp"
#include "crl/dataset.hpp"
#include "crl/env.hpp"

namespace crl {

// One accuracy measurement; rows stream into the per-run eval CSV with
// columns episodes,split,length,src_lang,tgt_lang,seed,accuracy.
struct EvalRow {
  std::int64_t episodes = 0;
  std::string split;
  int len = 0;
  int src = 0;
  int tgt = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

struct EvalOptions {
  std::int64_t episode_stamp = 0;
  std::uint64_t seed = 0;
  int subsample = 0;  // 0 evaluates full pools
  int max_len = 0;    // 0 evaluates every length present
  bool include_train = true;
  bool include_val = true;
  bool include_test = true;
  bool include_heldout = true;
};

// Greedy action selection throughout.
std::vector<EvalRow> evaluate_model(const RolloutPolicy& policy, const ModuleSet& mods,
                                    const Dataset& ds, const HorizonMode& mode,
                                    const EvalOptions& opt);

std::vector<EvalRow> evaluate_baseline(const BaselineParams& net, const Dataset& ds,
                                       const EvalOptions& opt);

double pool_accuracy_model(const RolloutPolicy& policy, const ModuleSet& mods,
                           const std::vector<const ProblemInstance*>& pool,
                           const Vocab& vocab, const HorizonMode& mode);

double pool_accuracy_baseline(const BaselineParams& net,
                              const std::vector<const ProblemInstance*>& pool,
                              const Vocab& vocab);

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows, bool append);
std::vector<EvalRow> read_eval_csv(const std::string& path);

// Linear-interpolation percentile (q in [0, 100]).
double percentile(std::vector<double> values, double q);

struct AggregateRow {
  std::int64_t episodes = 0;
  std::string split;
  int len = 0;
  double p10 = 0.0, p50 = 0.0, p90 = 0.0;
};

// Per (episodes, split, length): per-seed accuracy is the mean over language
// pairs, percentiles run across seeds.
std::vector<AggregateRow> aggregate_rows(const std::vector<std::vector<EvalRow>>& per_seed);

void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows);

}  // namespace crl
