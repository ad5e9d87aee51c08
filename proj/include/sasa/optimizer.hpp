// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sasa/params.hpp"

namespace sasa {

struct LRSchedule {
  double base_lr = 1e-3;
  long total_steps = 0;
  double min_lr = 0.0;
};

// Cosine decay: min + 0.5 (base - min)(1 + cos(pi * step / total)), clamped
// to min_lr for step >= total_steps.
inline double lr_at_step(const LRSchedule& s, long step) {
  require(s.total_steps > 0, "lr_at_step: total_steps must be > 0");
  if (step >= s.total_steps) return s.min_lr;
  const double progress = static_cast<double>(step) / static_cast<double>(s.total_steps);
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) *
                        (1.0 + std::cos(3.14159265358979323846 * progress));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // decoupled; weight matrices only
};

// Adaptive moment estimation with decoupled weight decay. Decay touches only
// parameters flagged weight_decay (weight matrices; never biases, layer-norm
// gains, or the temperature).
class AdamW {
 public:
  AdamW(ParameterStore<double>& store, const AdamWConfig& cfg)
      : store_(store), cfg_(cfg) {
    for (const auto& p : store.all()) {
      m_.push_back(MatrixD::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(MatrixD::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const auto& params = store_.all();
    for (std::size_t i = 0; i < params.size(); ++i) {
      Parameter<double>& p = *params[i];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
      const MatrixD m_hat = m_[i] / bc1;
      const MatrixD v_hat = v_[i] / bc2;
      MatrixD update = m_hat.array() / (v_hat.array().sqrt() + cfg_.eps);
      if (p.weight_decay) update += cfg_.weight_decay * p.value;
      p.value -= lr * update;
    }
  }

  long t() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

  // Optimizer state for checkpointing, in store order.
  std::vector<std::pair<std::string, MatrixD>> state() const {
    std::vector<std::pair<std::string, MatrixD>> out;
    const auto& params = store_.all();
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.emplace_back("adam.m." + params[i]->name, m_[i]);
      out.emplace_back("adam.v." + params[i]->name, v_[i]);
    }
    return out;
  }

  void restore(long t, const std::vector<MatrixD>& m, const std::vector<MatrixD>& v) {
    require(m.size() == m_.size() && v.size() == v_.size(),
            "optimizer state size mismatch");
    t_ = t;
    m_ = m;
    v_ = v;
  }

 private:
  ParameterStore<double>& store_;
  AdamWConfig cfg_;
  long t_ = 0;
  std::vector<MatrixD> m_, v_;
};

}  // namespace sasa
