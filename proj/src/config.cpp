#include "crl/config.hpp"

#include <fstream>
#include <sstream>

#include "crl/error.hpp"

namespace crl {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  fail("config", "bad boolean for " + key + ": " + v);
}

}  // namespace

ConfigPairs config_to_pairs(const TrainConfig& cfg) {
  ConfigPairs p;
  auto put = [&](const std::string& k, const std::string& v) { p.emplace_back(k, v); };
  put("task", cfg.task);
  put("model", cfg.model);
  put("data_scale", std::to_string(cfg.data_scale));
  put("reducers", std::to_string(cfg.reducers));
  put("translators", std::to_string(cfg.translators));
  put("module_hidden", std::to_string(cfg.module_hidden));
  put("controller_hidden", std::to_string(cfg.controller_hidden));
  put("shared_encoder", cfg.shared_encoder ? "true" : "false");
  put("horizon", cfg.bounded ? "bounded" : "infinite");
  put("bounded_steps", std::to_string(cfg.bounded_steps));
  put("step_penalty", format_g17(cfg.step_penalty));
  put("halt_noop", cfg.halt_noop ? "true" : "false");
  put("step_cap", std::to_string(cfg.step_cap));
  put("episodes", std::to_string(cfg.episodes));
  put("k_controller", std::to_string(cfg.k_controller));
  put("k_modules", std::to_string(cfg.k_modules));
  put("clip", format_g17(cfg.clip));
  put("ppo_epochs", std::to_string(cfg.ppo_epochs));
  put("minibatch", std::to_string(cfg.minibatch));
  put("entropy_coef", format_g17(cfg.entropy_coef));
  put("value_coef", format_g17(cfg.value_coef));
  put("lr_controller", format_g17(cfg.lr_controller));
  put("lr_modules", format_g17(cfg.lr_modules));
  put("curriculum", cfg.curriculum ? "true" : "false");
  put("curriculum_cadence", std::to_string(cfg.curriculum_cadence));
  put("min_len", std::to_string(cfg.min_len));
  put("max_len", std::to_string(cfg.max_len));
  put("baseline_hidden", std::to_string(cfg.baseline_hidden));
  put("baseline_batch", std::to_string(cfg.baseline_batch));
  put("lr_baseline", format_g17(cfg.lr_baseline));
  put("seed", std::to_string(cfg.seed));
  put("eval_every", std::to_string(cfg.eval_every));
  put("checkpoint_every", std::to_string(cfg.checkpoint_every));
  put("eval_subsample", std::to_string(cfg.eval_subsample));
  return p;
}

void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto to_i = [&](const std::string& v) {
    try {
      return std::stoll(v);
    } catch (...) {
      fail("config", "bad integer for " + key + ": " + v);
    }
  };
  auto to_d = [&](const std::string& v) {
    try {
      return std::stod(v);
    } catch (...) {
      fail("config", "bad number for " + key + ": " + v);
    }
  };
  if (key == "task") {
    if (value != "numerical" && value != "multilingual") fail("config", "bad task: " + value);
    cfg.task = value;
  } else if (key == "model") {
    if (value != "crl" && value != "rnn" && value != "hcc" && value != "hcf") {
      fail("config", "bad model: " + value);
    }
    cfg.model = value;
  } else if (key == "data_scale") {
    cfg.data_scale = static_cast<int>(to_i(value));
  } else if (key == "reducers") {
    cfg.reducers = static_cast<int>(to_i(value));
  } else if (key == "translators") {
    cfg.translators = static_cast<int>(to_i(value));
  } else if (key == "module_hidden") {
    cfg.module_hidden = static_cast<int>(to_i(value));
  } else if (key == "controller_hidden") {
    cfg.controller_hidden = static_cast<int>(to_i(value));
  } else if (key == "shared_encoder") {
    cfg.shared_encoder = parse_bool(value, key);
  } else if (key == "horizon") {
    if (value == "infinite") {
      cfg.bounded = false;
    } else if (value == "bounded") {
      cfg.bounded = true;
    } else {
      fail("config", "bad horizon: " + value);
    }
  } else if (key == "bounded_steps") {
    cfg.bounded_steps = static_cast<int>(to_i(value));
  } else if (key == "step_penalty") {
    cfg.step_penalty = to_d(value);
  } else if (key == "halt_noop") {
    cfg.halt_noop = parse_bool(value, key);
  } else if (key == "step_cap") {
    cfg.step_cap = static_cast<int>(to_i(value));
  } else if (key == "episodes") {
    cfg.episodes = to_i(value);
  } else if (key == "k_controller") {
    cfg.k_controller = static_cast<int>(to_i(value));
  } else if (key == "k_modules") {
    cfg.k_modules = static_cast<int>(to_i(value));
  } else if (key == "clip") {
    cfg.clip = to_d(value);
  } else if (key == "ppo_epochs") {
    cfg.ppo_epochs = static_cast<int>(to_i(value));
  } else if (key == "minibatch") {
    cfg.minibatch = static_cast<int>(to_i(value));
  } else if (key == "entropy_coef") {
    cfg.entropy_coef = to_d(value);
  } else if (key == "value_coef") {
    cfg.value_coef = to_d(value);
  } else if (key == "lr_controller") {
    cfg.lr_controller = to_d(value);
  } else if (key == "lr_modules") {
    cfg.lr_modules = to_d(value);
  } else if (key == "curriculum") {
    cfg.curriculum = parse_bool(value, key);
  } else if (key == "curriculum_cadence") {
    cfg.curriculum_cadence = to_i(value);
  } else if (key == "min_len") {
    cfg.min_len = static_cast<int>(to_i(value));
  } else if (key == "max_len") {
    cfg.max_len = static_cast<int>(to_i(value));
  } else if (key == "baseline_hidden") {
    cfg.baseline_hidden = static_cast<int>(to_i(value));
  } else if (key == "baseline_batch") {
    cfg.baseline_batch = static_cast<int>(to_i(value));
  } else if (key == "lr_baseline") {
    cfg.lr_baseline = to_d(value);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(to_i(value));
  } else if (key == "eval_every") {
    cfg.eval_every = to_i(value);
  } else if (key == "checkpoint_every") {
    cfg.checkpoint_every = to_i(value);
  } else if (key == "eval_subsample") {
    cfg.eval_subsample = static_cast<int>(to_i(value));
  } else {
    fail("config", "unknown config key: " + key);
  }
}

TrainConfig config_from_pairs(const ConfigPairs& pairs) {
  TrainConfig cfg;
  for (const auto& [key, value] : pairs) apply_config_kv(cfg, key, value);
  return cfg;
}

ConfigPairs read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config", "cannot open config file: " + path);
  ConfigPairs pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail("config", path + ":" + std::to_string(line_no) + ": expected key = value");
    }
    pairs.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return pairs;
}

void write_config_file(const std::string& path, const ConfigPairs& pairs) {
  std::ofstream out(path);
  if (!out) fail("io", "cannot write config: " + path);
  for (const auto& [key, value] : pairs) out << key << " = " << value << "\n";
}

}  // namespace crl
