#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crl/training.hpp"

namespace crl {

using ConfigPairs = std::vector<std::pair<std::string, std::string>>;

// Flat key=value serialization of a training configuration; the same pairs
// appear in run-directory config copies and in checkpoint metadata.
ConfigPairs config_to_pairs(const TrainConfig& cfg);
TrainConfig config_from_pairs(const ConfigPairs& pairs);

// Applies one key; rejects unknown keys or unparseable values.
void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value);

// Lines of `key = value`; '#' starts a comment.
ConfigPairs read_config_file(const std::string& path);
void write_config_file(const std::string& path, const ConfigPairs& pairs);

}  // namespace crl
