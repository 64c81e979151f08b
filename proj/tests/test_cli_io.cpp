#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crl/config.hpp"
#include "crl/error.hpp"

using namespace crl;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "crl_cli_test";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CRL_BIN) + " " + args + " >" +
                          (kWork / "stdout.txt").string() + " 2>" +
                          (kWork / "stderr.txt").string();
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  int n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("config files parse with precedence and validation") {
  fs::create_directories(kWork);
  const fs::path cfg_path = kWork / "cfg.txt";
  std::ofstream(cfg_path) << "# comment\n"
                          << "task = numerical\n"
                          << "model = hcf   # trailing comment\n"
                          << "episodes = 123\n";
  TrainConfig cfg;
  for (const auto& [k, v] : read_config_file(cfg_path.string())) apply_config_kv(cfg, k, v);
  CHECK(cfg.task == "numerical");
  CHECK(cfg.model == "hcf");
  CHECK(cfg.episodes == 123);
  apply_config_kv(cfg, "episodes", "456");  // later application wins
  CHECK(cfg.episodes == 456);
  CHECK_THROWS_AS(apply_config_kv(cfg, "bogus_key", "1"), CrlError);
  CHECK_THROWS_AS(apply_config_kv(cfg, "episodes", "not-a-number"), CrlError);

  // round trip through pairs
  const TrainConfig back = config_from_pairs(config_to_pairs(cfg));
  CHECK(back.model == cfg.model);
  CHECK(back.episodes == cfg.episodes);
  CHECK(back.step_penalty == cfg.step_penalty);
}

TEST_CASE("generate, train, eval, trace, export work end to end") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  const std::string data = (kWork / "data").string();

  // generate
  REQUIRE(run_cli("generate --task numerical --scale 1 --seed 0 --out " + data) == 0);
  CHECK(line_count(kWork / "data" / "train.tsv") == 147 + 490 * 8);
  // refuses to clobber without --force
  CHECK(run_cli("generate --task numerical --out " + data) != 0);
  CHECK(slurp(kWork / "stderr.txt").find("error: dataset-exists") != std::string::npos);
  REQUIRE(run_cli("generate --task numerical --scale 1 --seed 0 --out " + data + " --force") == 0);

  // train two tiny seeds
  const std::string run = (kWork / "run").string();
  REQUIRE(run_cli("train --data " + data + " --out " + run +
                  " --model crl --task numerical --episodes 256 --seeds 2"
                  " --set reducers=1 --set controller_hidden=10 --set module_hidden=12"
                  " --set k_controller=128 --set k_modules=64 --set minibatch=64"
                  " --set ppo_epochs=1 --set curriculum=false --set max_len=3"
                  " --set eval_every=128 --set eval_subsample=20") == 0);
  CHECK(fs::exists(kWork / "run" / "seed0" / "eval.csv"));
  CHECK(fs::exists(kWork / "run" / "seed1" / "eval.csv"));
  CHECK(fs::exists(kWork / "run" / "seed0" / "checkpoint_final.txt"));
  CHECK(fs::exists(kWork / "run" / "seed0" / "config.txt"));
  CHECK(fs::exists(kWork / "run" / "aggregate.csv"));

  // eval on the dataset splits
  const std::string ckpt = (kWork / "run" / "seed0" / "checkpoint_final.txt").string();
  REQUIRE(run_cli("eval --checkpoint " + ckpt + " --data " + data + " --out " +
                  (kWork / "eval.csv").string()) == 0);
  CHECK(slurp(kWork / "eval.csv").find("episodes,split,length") != std::string::npos);

  // extrapolation sweep
  REQUIRE(run_cli("eval --checkpoint " + ckpt + " --data " + data + " --out " +
                  (kWork / "extrap.csv").string() + " --lengths 11:12 --samples 5") == 0);
  CHECK(slurp(kWork / "extrap.csv").find("extrapolation") != std::string::npos);

  // missing checkpoint is a categorized error
  CHECK(run_cli("eval --checkpoint /nonexistent.txt --data " + data + " --out " +
                (kWork / "x.csv").string()) != 0);
  CHECK(slurp(kWork / "stderr.txt").find("error: checkpoint-missing") != std::string::npos);

  // trace
  REQUIRE(run_cli("trace --checkpoint " + ckpt + " --data " + data + " --out " +
                  (kWork / "traces.txt").string() + " -n 3 --seed 1") == 0);
  const std::string traces = slurp(kWork / "traces.txt");
  CHECK(traces.find("# trace 0") != std::string::npos);
  CHECK(traces.find("END") != std::string::npos);

  // export over the run dir
  REQUIRE(run_cli("export --run " + run + " --out " + (kWork / "agg.csv").string()) == 0);
  const std::string agg = slurp(kWork / "agg.csv");
  CHECK(agg.find("episodes,split,length,p10,p50,p90") != std::string::npos);

  // single-seed export collapses percentiles
  const std::string solo = (kWork / "solo").string();
  REQUIRE(run_cli("train --data " + data + " --out " + solo +
                  " --model rnn --task numerical --episodes 128 --seeds 1"
                  " --set baseline_hidden=8 --set baseline_batch=32"
                  " --set curriculum=false --set max_len=2 --set eval_every=0"
                  " --set eval_subsample=20") == 0);
  REQUIRE(run_cli("export --run " + solo + " --out " + (kWork / "solo.csv").string()) == 0);
  std::ifstream in(kWork / "solo.csv");
  std::string header, row;
  std::getline(in, header);
  bool any = false;
  while (std::getline(in, row)) {
    std::istringstream ls(row);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 6);
    CHECK(fields[3] == fields[4]);
    CHECK(fields[4] == fields[5]);
    any = true;
  }
  CHECK(any);

  // inconsistent configs across seeds are refused
  std::ofstream((kWork / "run" / "seed1" / "config.txt"), std::ios::app) << "max_len = 4\n";
  CHECK(run_cli("export --run " + run + " --out " + (kWork / "bad.csv").string()) != 0);
  CHECK(slurp(kWork / "stderr.txt").find("error: inconsistent-configs") != std::string::npos);

  // empty run dir errors
  fs::create_directories(kWork / "empty");
  CHECK(run_cli("export --run " + (kWork / "empty").string() + " --out " +
                (kWork / "e.csv").string()) != 0);

  fs::remove_all(kWork);
}
