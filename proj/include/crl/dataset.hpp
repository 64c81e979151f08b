#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crl/expression.hpp"
#include "crl/rng.hpp"
#include "crl/vocab.hpp"

namespace crl {

// One (input expression, source language, target language, answer) sample.
// The answer id encodes the target language block.
struct ProblemInstance {
  std::vector<int> input_ids;
  int src = 0;
  int tgt = 0;
  int answer_id = 0;
  int terms = 0;
};

ProblemInstance make_instance(const Expression& expr, int src, int tgt);

struct PoolKey {
  int len = 0;
  int src = 0;
  int tgt = 0;
  auto operator<=>(const PoolKey&) const = default;
};

struct SplitPools {
  std::vector<ProblemInstance> train, val, test;
};

// Immutable after construction; pools keyed by (length, language pair).
// Held-out pairs carry evaluation-only pools.
struct Dataset {
  std::string task = "numerical";
  int languages = 1;
  int scale = 1;
  std::uint64_t seed = 0;
  int min_len = 2;
  int max_len = 10;
  std::vector<std::pair<int, int>> train_pairs;
  std::vector<std::pair<int, int>> heldout_pairs;
  std::map<PoolKey, SplitPools> pools;
  std::map<PoolKey, std::vector<ProblemInstance>> heldout;
  std::vector<std::string> notes;

  Vocab vocab() const { return Vocab{languages}; }

  // Uniform sampling pool over the union of train splits for lengths up to
  // max_len inclusive (the expanding dataset view).
  std::vector<const ProblemInstance*> curriculum_pool(int up_to_len) const;

  std::int64_t total_instances() const;
};

// Held-out pairs form a perfect matching: each language exactly once as
// source and once as target; the remaining 20 pairs train.
std::pair<std::vector<std::pair<int, int>>, std::vector<std::pair<int, int>>>
select_language_pairs(SeededRng& rng);

// Appendix-table counts at base scale: numerical 210 at k=2 and 700 at each
// k in [3,10] (5810 total); multilingual 210/700 per training pair over
// k in [2,5] (46200 total). scale=10 multiplies counts, capping at the
// problem space (only binds at k=2) and recording the cap in notes.
Dataset build_numerical_dataset(int scale, std::uint64_t seed);
Dataset build_multilingual_dataset(int scale, std::uint64_t seed);

// Fresh evaluation instances at lengths beyond the training maximum.
std::vector<ProblemInstance> gen_extrapolation_set(int len,
                                                   const std::vector<std::pair<int, int>>& pairs,
                                                   int per_pair, std::uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& dir, bool force);
Dataset load_dataset(const std::string& dir);

// Curriculum schedule over expression lengths; stages advance every
// `cadence` episodes and pools are nested by construction.
struct Curriculum {
  bool enabled = true;
  int min_len = 2;
  int max_len = 5;
  std::int64_t cadence = 100000;

  int max_len_at(std::int64_t episode) const {
    if (!enabled) return max_len;
    const std::int64_t stage = episode / cadence;
    const std::int64_t len = min_len + stage;
    return len > max_len ? max_len : static_cast<int>(len);
  }

  int stage_at(std::int64_t episode) const { return max_len_at(episode) - min_len; }

  // Episode index at which the final stage begins (the point where all the
  // training data has been added).
  std::int64_t all_data_episode() const {
    return enabled ? cadence * (max_len - min_len) : 0;
  }
};

}  // namespace crl
