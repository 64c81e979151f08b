#include "crl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "crl/error.hpp"

namespace fs = std::filesystem;

namespace crl {

ProblemInstance make_instance(const Expression& expr, int src, int tgt) {
  ProblemInstance inst;
  inst.input_ids = expr.token_ids(src);
  inst.src = src;
  inst.tgt = tgt;
  inst.answer_id = Vocab::kBlock * tgt + eval_mod10(expr);
  inst.terms = expr.terms();
  return inst;
}

std::vector<const ProblemInstance*> Dataset::curriculum_pool(int up_to_len) const {
  std::vector<const ProblemInstance*> out;
  for (const auto& [key, split] : pools) {
    if (key.len > up_to_len) continue;
    for (const ProblemInstance& inst : split.train) out.push_back(&inst);
  }
  return out;
}

std::int64_t Dataset::total_instances() const {
  std::int64_t n = 0;
  for (const auto& [key, split] : pools) {
    n += static_cast<std::int64_t>(split.train.size() + split.val.size() + split.test.size());
  }
  return n;
}

std::pair<std::vector<std::pair<int, int>>, std::vector<std::pair<int, int>>>
select_language_pairs(SeededRng& rng) {
  // Held-out targets are a random permutation of the sources.
  std::vector<int> perm = {0, 1, 2, 3, 4};
  rng.shuffle(std::span<int>(perm));
  std::vector<std::pair<int, int>> heldout;
  for (int s = 0; s < 5; ++s) heldout.emplace_back(s, perm[static_cast<std::size_t>(s)]);
  std::vector<std::pair<int, int>> train;
  for (int s = 0; s < 5; ++s) {
    for (int t = 0; t < 5; ++t) {
      if (perm[static_cast<std::size_t>(s)] != t) train.emplace_back(s, t);
    }
  }
  return {train, heldout};
}

namespace {

double problem_space(int k) {
  return std::pow(10.0, k) * std::pow(3.0, k - 1);
}

// n distinct expressions of k terms. Enumerates when the space is small
// enough that rejection sampling would thrash; otherwise rejection-samples
// against a dedup set.
std::vector<Expression> distinct_expressions(int k, int n, SeededRng& rng,
                                             std::vector<std::string>* notes,
                                             const std::string& pool_name) {
  const double space = problem_space(k);
  if (n > space) {
    if (notes) {
      notes->push_back("capped " + pool_name + " at problem space " +
                       std::to_string(static_cast<long long>(space)) + " (requested " +
                       std::to_string(n) + ")");
    }
    n = static_cast<int>(space);
  }
  std::vector<Expression> out;
  out.reserve(static_cast<std::size_t>(n));
  if (space <= 16384.0 && n > space / 2.0) {
    // Full enumeration, then a seeded shuffle.
    const int total = static_cast<int>(space);
    std::vector<Expression> all;
    all.reserve(static_cast<std::size_t>(total));
    // Odometer over digits then operators.
    Expression e;
    e.digits.assign(static_cast<std::size_t>(k), 0);
    e.ops.assign(static_cast<std::size_t>(k - 1), OpSym::Plus);
    for (long long code = 0; code < total; ++code) {
      long long c = code;
      for (int i = 0; i < k; ++i) {
        e.digits[static_cast<std::size_t>(i)] = static_cast<int>(c % 10);
        c /= 10;
      }
      for (int i = 0; i + 1 < k; ++i) {
        e.ops[static_cast<std::size_t>(i)] = static_cast<OpSym>(c % 3);
        c /= 3;
      }
      all.push_back(e);
    }
    rng.shuffle(std::span<Expression>(all));
    all.resize(static_cast<std::size_t>(n));
    return all;
  }
  std::unordered_set<std::string> seen;
  seen.reserve(static_cast<std::size_t>(n) * 2);
  while (static_cast<int>(out.size()) < n) {
    Expression e = gen_expression(k, rng);
    if (seen.insert(e.text()).second) out.push_back(std::move(e));
  }
  return out;
}

SplitPools split_70_15_15(std::vector<Expression> exprs, int src, int tgt) {
  const int n = static_cast<int>(exprs.size());
  const int n_train = n * 70 / 100;
  const int n_val = n * 15 / 100;
  SplitPools out;
  for (int i = 0; i < n; ++i) {
    ProblemInstance inst = make_instance(exprs[static_cast<std::size_t>(i)], src, tgt);
    if (i < n_train) {
      out.train.push_back(std::move(inst));
    } else if (i < n_train + n_val) {
      out.val.push_back(std::move(inst));
    } else {
      out.test.push_back(std::move(inst));
    }
  }
  return out;
}

int base_count(int k) { return k == 2 ? 210 : 700; }

}  // namespace

Dataset build_numerical_dataset(int scale, std::uint64_t seed) {
  if (scale != 1 && scale != 10) fail("config", "data scale must be 1 or 10");
  Dataset ds;
  ds.task = "numerical";
  ds.languages = 1;
  ds.scale = scale;
  ds.seed = seed;
  ds.min_len = 2;
  ds.max_len = 10;
  ds.train_pairs = {{0, 0}};
  for (int k = 2; k <= 10; ++k) {
    SeededRng rng = SeededRng::stream(seed, "numerical-pool", static_cast<std::uint64_t>(k));
    std::vector<Expression> exprs = distinct_expressions(
        k, base_count(k) * scale, rng, &ds.notes, "k=" + std::to_string(k));
    ds.pools[PoolKey{k, 0, 0}] = split_70_15_15(std::move(exprs), 0, 0);
  }
  return ds;
}

Dataset build_multilingual_dataset(int scale, std::uint64_t seed) {
  if (scale != 1 && scale != 10) fail("config", "data scale must be 1 or 10");
  Dataset ds;
  ds.task = "multilingual";
  ds.languages = 5;
  ds.scale = scale;
  ds.seed = seed;
  ds.min_len = 2;
  ds.max_len = 5;
  SeededRng pair_rng = SeededRng::stream(seed, "language-pairs");
  auto [train_pairs, heldout_pairs] = select_language_pairs(pair_rng);
  ds.train_pairs = train_pairs;
  ds.heldout_pairs = heldout_pairs;
  for (const auto& [src, tgt] : train_pairs) {
    for (int k = 2; k <= 5; ++k) {
      SeededRng rng = SeededRng::stream(
          seed, "multilingual-pool",
          static_cast<std::uint64_t>(k) * 100 + static_cast<std::uint64_t>(src) * 10 +
              static_cast<std::uint64_t>(tgt));
      std::vector<Expression> exprs = distinct_expressions(
          k, base_count(k) * scale, rng, &ds.notes,
          "k=" + std::to_string(k) + " pair " + std::to_string(src) + ":" + std::to_string(tgt));
      ds.pools[PoolKey{k, src, tgt}] = split_70_15_15(std::move(exprs), src, tgt);
    }
  }
  // Evaluation-only pools for the held-out pairs, sized like test splits.
  for (const auto& [src, tgt] : heldout_pairs) {
    for (int k = 2; k <= 5; ++k) {
      SeededRng rng = SeededRng::stream(
          seed, "heldout-pool",
          static_cast<std::uint64_t>(k) * 100 + static_cast<std::uint64_t>(src) * 10 +
              static_cast<std::uint64_t>(tgt));
      const int n = k == 2 ? 32 : 105;
      std::vector<Expression> exprs = distinct_expressions(k, n, rng, nullptr, "");
      std::vector<ProblemInstance>& pool = ds.heldout[PoolKey{k, src, tgt}];
      for (const Expression& e : exprs) pool.push_back(make_instance(e, src, tgt));
    }
  }
  return ds;
}

std::vector<ProblemInstance> gen_extrapolation_set(
    int len, const std::vector<std::pair<int, int>>& pairs, int per_pair,
    std::uint64_t seed) {
  std::vector<ProblemInstance> out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    SeededRng rng = SeededRng::stream(seed, "extrapolation",
                                      static_cast<std::uint64_t>(len) * 1000 + p);
    std::vector<Expression> exprs = distinct_expressions(len, per_pair, rng, nullptr, "");
    for (const Expression& e : exprs) {
      out.push_back(make_instance(e, pairs[p].first, pairs[p].second));
    }
  }
  return out;
}

// --- file io ----------------------------------------------------------------

namespace {

void write_pool(std::ofstream& out, const std::vector<ProblemInstance>& pool) {
  for (const ProblemInstance& inst : pool) {
    out << inst.src << "\t" << inst.tgt << "\t";
    for (std::size_t i = 0; i < inst.input_ids.size(); ++i) {
      if (i) out << " ";
      out << inst.input_ids[i];
    }
    out << "\t" << inst.answer_id << "\n";
  }
}

std::vector<ProblemInstance> read_pool_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("dataset-missing", "cannot open " + path);
  std::vector<ProblemInstance> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ProblemInstance inst;
    std::string ids;
    if (!(ls >> inst.src >> inst.tgt)) fail("dataset", "bad line in " + path);
    ls.ignore(1);
    if (!std::getline(ls, ids, '\t')) fail("dataset", "bad line in " + path);
    std::istringstream is(ids);
    int id;
    while (is >> id) inst.input_ids.push_back(id);
    if (!(ls >> inst.answer_id)) fail("dataset", "bad line in " + path);
    inst.terms = (static_cast<int>(inst.input_ids.size()) + 1) / 2;
    out.push_back(std::move(inst));
  }
  return out;
}

std::string pairs_to_string(const std::vector<std::pair<int, int>>& pairs) {
  std::string out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(pairs[i].first) + ":" + std::to_string(pairs[i].second);
  }
  return out;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) fail("dataset", "bad pair list: " + text);
    out.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir, bool force) {
  if (fs::exists(fs::path(dir) / "manifest.txt") && !force) {
    fail("dataset-exists", "dataset already present in " + dir + " (use --force)");
  }
  fs::create_directories(dir);
  std::ofstream train(fs::path(dir) / "train.tsv");
  std::ofstream val(fs::path(dir) / "val.tsv");
  std::ofstream test(fs::path(dir) / "test.tsv");
  for (const auto& [key, split] : ds.pools) {
    write_pool(train, split.train);
    write_pool(val, split.val);
    write_pool(test, split.test);
  }
  if (!ds.heldout.empty()) {
    std::ofstream held(fs::path(dir) / "heldout.tsv");
    for (const auto& [key, pool] : ds.heldout) write_pool(held, pool);
  }
  std::ofstream man(fs::path(dir) / "manifest.txt");
  if (!man) fail("io", "cannot write manifest in " + dir);
  man << "crl-dataset 1\n";
  man << "task " << ds.task << "\n";
  man << "languages " << ds.languages << "\n";
  man << "scale " << ds.scale << "\n";
  man << "seed " << ds.seed << "\n";
  man << "min_len " << ds.min_len << "\n";
  man << "max_len " << ds.max_len << "\n";
  man << "train_pairs " << pairs_to_string(ds.train_pairs) << "\n";
  if (!ds.heldout_pairs.empty()) {
    man << "heldout_pairs " << pairs_to_string(ds.heldout_pairs) << "\n";
  }
  for (const std::string& note : ds.notes) man << "note " << note << "\n";
  for (const auto& [key, split] : ds.pools) {
    man << "count " << key.len << " " << key.src << " " << key.tgt << " "
        << split.train.size() << " " << split.val.size() << " " << split.test.size()
        << "\n";
  }
  for (const auto& [key, pool] : ds.heldout) {
    man << "heldout_count " << key.len << " " << key.src << " " << key.tgt << " "
        << pool.size() << "\n";
  }
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream man(fs::path(dir) / "manifest.txt");
  if (!man) fail("dataset-missing", "no manifest.txt in " + dir);
  Dataset ds;
  std::string line;
  if (!std::getline(man, line) || line != "crl-dataset 1") {
    fail("dataset", "unrecognized manifest in " + dir);
  }
  std::map<PoolKey, std::array<std::size_t, 3>> expected;
  std::map<PoolKey, std::size_t> expected_heldout;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "task") {
      ls >> ds.task;
    } else if (key == "languages") {
      ls >> ds.languages;
    } else if (key == "scale") {
      ls >> ds.scale;
    } else if (key == "seed") {
      ls >> ds.seed;
    } else if (key == "min_len") {
      ls >> ds.min_len;
    } else if (key == "max_len") {
      ls >> ds.max_len;
    } else if (key == "train_pairs") {
      std::string v;
      ls >> v;
      ds.train_pairs = parse_pairs(v);
    } else if (key == "heldout_pairs") {
      std::string v;
      ls >> v;
      ds.heldout_pairs = parse_pairs(v);
    } else if (key == "note") {
      std::string rest;
      std::getline(ls, rest);
      ds.notes.push_back(rest.empty() ? rest : rest.substr(1));
    } else if (key == "count") {
      PoolKey pk;
      std::array<std::size_t, 3> c{};
      ls >> pk.len >> pk.src >> pk.tgt >> c[0] >> c[1] >> c[2];
      expected[pk] = c;
    } else if (key == "heldout_count") {
      PoolKey pk;
      std::size_t c = 0;
      ls >> pk.len >> pk.src >> pk.tgt >> c;
      expected_heldout[pk] = c;
    }
  }
  auto load_split = [&](const std::string& name, int which) {
    const fs::path path = fs::path(dir) / name;
    if (!fs::exists(path)) return;
    for (ProblemInstance& inst : read_pool_file(path.string())) {
      const PoolKey pk{inst.terms, inst.src, inst.tgt};
      SplitPools& split = ds.pools[pk];
      (which == 0 ? split.train : which == 1 ? split.val : split.test)
          .push_back(std::move(inst));
    }
  };
  load_split("train.tsv", 0);
  load_split("val.tsv", 1);
  load_split("test.tsv", 2);
  if (fs::exists(fs::path(dir) / "heldout.tsv")) {
    for (ProblemInstance& inst : read_pool_file((fs::path(dir) / "heldout.tsv").string())) {
      ds.heldout[PoolKey{inst.terms, inst.src, inst.tgt}].push_back(std::move(inst));
    }
  }
  for (const auto& [pk, c] : expected) {
    const auto it = ds.pools.find(pk);
    if (it == ds.pools.end() || it->second.train.size() != c[0] ||
        it->second.val.size() != c[1] || it->second.test.size() != c[2]) {
      fail("dataset", "pool counts do not match manifest in " + dir);
    }
  }
  for (const auto& [pk, c] : expected_heldout) {
    const auto it = ds.heldout.find(pk);
    if (it == ds.heldout.end() || it->second.size() != c) {
      fail("dataset", "held-out counts do not match manifest in " + dir);
    }
  }
  return ds;
}

}  // namespace crl
