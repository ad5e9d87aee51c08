// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sasa/random.hpp"
#include "sasa/tape.hpp"

namespace sasa {

// Owns all trainable parameters of a model in creation order. Creation order
// is the serialization and optimizer-update order, so it must be
// deterministic.
template <class Scalar>
class ParameterStore {
 public:
  Parameter<Scalar>* add(std::string name, Matrix<Scalar> value, bool decay) {
    require(by_name_.find(name) == by_name_.end(), "duplicate parameter: " + name);
    params_.push_back(std::make_unique<Parameter<Scalar>>(std::move(name),
                                                          std::move(value), decay));
    Parameter<Scalar>* p = params_.back().get();
    by_name_[p->name] = p;
    return p;
  }

  Parameter<Scalar>* create_normal(const std::string& name, Index rows, Index cols,
                                   Rng& rng, double stddev, bool decay) {
    Matrix<Scalar> m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<Scalar>(rng.normal(0.0, stddev));
    return add(name, std::move(m), decay);
  }

  Parameter<Scalar>* create_constant(const std::string& name, Index rows, Index cols,
                                     Scalar v, bool decay = false) {
    return add(name, Matrix<Scalar>::Constant(rows, cols, v), decay);
  }

  Parameter<Scalar>* find(const std::string& name) const {
    auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : it->second;
  }

  const std::vector<std::unique_ptr<Parameter<Scalar>>>& all() const { return params_; }

  void zero_grad() {
    for (auto& p : params_) p->grad.setZero();
  }

  std::size_t coordinate_count() const {
    std::size_t n = 0;
    for (auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::unordered_map<std::string, Parameter<Scalar>*> by_name_;
};

}  // namespace sasa
