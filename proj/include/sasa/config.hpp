// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "sasa/model.hpp"

namespace sasa {

struct TrainConfig {
  // optimization
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 10;
  double weight_decay = 0.01;
  double min_lr = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // objectives
  double w1 = 1.0;
  double w2 = 1.0;
  double local_cl_dropout = 0.1;
  bool use_separated_attention = true;
  bool use_local_cl = true;
  bool use_global_cl = true;
  int hard_negative_k = 3;
  // model
  int d = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 128;
  double dropout = 0.1;
  // data
  int min_freq = 1;
  std::uint64_t seed = 7;

  void validate() const;
  ModelHyper hyper(int vocab_size) const;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  // Applies `key=value` overrides; throws on unknown keys or bad values.
  void apply(const std::map<std::string, std::string>& overrides);
};

// Flat key=value file; '#' starts a comment, blank lines ignored.
std::map<std::string, std::string> load_config_file(const std::string& path);

// Stable content hash of a config snapshot (for manifests).
std::string config_hash(const nlohmann::json& j);

}  // namespace sasa
