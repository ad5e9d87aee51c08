// SPDX-License-Identifier: Apache-2.0
//
// Versioned binary checkpoint: a JSON header (config snapshot, vocabulary,
// counters, tensor directory) followed by raw little-endian IEEE-754 double
// blobs in row-major order. Byte-identical for identical training runs.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sasa/common.hpp"

namespace sasa {

struct Checkpoint {
  static constexpr int kVersion = 1;

  long step = 0;
  int epoch = 0;
  nlohmann::json config;              // flat TrainConfig snapshot
  std::vector<std::string> vocab;     // tokens in id order, reserved rows first
  std::vector<std::pair<std::string, MatrixD>> tensors;  // params then optimizer state

  const MatrixD* find(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

}  // namespace sasa
