// SPDX-License-Identifier: Apache-2.0
//
// Hierarchical contrastive objectives over the pooled tower embeddings:
// generalized InfoNCE with cosine scoring and a learnable temperature,
// a local level (dropout-augmented positive against in-batch tails) and a
// global level (mined hard negatives).

#pragma once

#include <cmath>
#include <vector>

#include "sasa/random.hpp"
#include "sasa/tape.hpp"

namespace sasa {

// lambda = log(1/tau); tau stays positive for every lambda. tau0 = 0.05.
inline double initial_log_inv_temperature() { return std::log(1.0 / 0.05); }

template <class Scalar>
Var<Scalar> inverse_temperature(Var<Scalar> lambda) {
  return exp_elem(lambda);
}

// Cosine of two unit vectors is their dot product.
template <class Scalar>
Var<Scalar> score(Var<Scalar> e_hr, Var<Scalar> e_t) {
  return dot(e_hr, e_t);
}

namespace detail {

// -log softmax(logits)[0] via a max-shifted log-sum-exp; numerically safe for
// any temperature the optimizer may reach.
template <class Scalar>
Var<Scalar> neg_log_softmax_at0(Var<Scalar> logits) {
  const Scalar m = logits.value().maxCoeff();
  Var<Scalar> lse = add_const(log_elem(sum_all(exp_elem(add_const(logits, -m)))), m);
  return sub(lse, pick(logits, 0, 0));
}

}  // namespace detail

// Local-level loss. For each anchor i the positive is a freshly dropped-out,
// re-normalized copy of its own tail embedding; the denominator runs over
// that augmented positive plus the raw tail embeddings of the other batch
// items. Returns the batch mean.
template <class Scalar>
Var<Scalar> local_cl_loss(Tape<Scalar>& tape, const std::vector<Var<Scalar>>& e_hr,
                          const std::vector<Var<Scalar>>& e_t, Scalar dropout_rate,
                          std::uint64_t seed, Var<Scalar> inv_tau) {
  const std::size_t n = e_hr.size();
  require(n == e_t.size(), "local_cl_loss: embedding count mismatch");
  require(n >= 2, "local_cl_loss: batch must have at least 2 positives");
  require(dropout_rate >= Scalar(0) && dropout_rate < Scalar(1),
          "local_cl_loss: dropout rate must be in [0, 1)");

  std::vector<Var<Scalar>> per_anchor;
  per_anchor.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Var<Scalar> augmented =
        l2_normalize_rows(dropout(e_t[i], dropout_rate, true, mix_seed(seed, i)));
    std::vector<Var<Scalar>> scores;
    scores.reserve(n);
    scores.push_back(score(e_hr[i], augmented));
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      scores.push_back(score(e_hr[i], e_t[j]));
    }
    Var<Scalar> logits = mul_scalarvar(concat_cols(scores), inv_tau);
    per_anchor.push_back(detail::neg_log_softmax_at0(logits));
  }
  return mean_all(concat_cols(per_anchor));
}

// Global-level loss for one anchor: the positive against its mined hard
// negatives, positive included in the denominator.
template <class Scalar>
Var<Scalar> global_cl_loss_single(Tape<Scalar>& tape, Var<Scalar> e_hr,
                                  Var<Scalar> e_t_pos,
                                  const std::vector<Var<Scalar>>& negatives,
                                  Var<Scalar> inv_tau) {
  require(!negatives.empty(), "global_cl_loss: empty hard-negative set");
  std::vector<Var<Scalar>> scores;
  scores.reserve(negatives.size() + 1);
  scores.push_back(score(e_hr, e_t_pos));
  for (const Var<Scalar>& neg : negatives) scores.push_back(score(e_hr, neg));
  Var<Scalar> logits = mul_scalarvar(concat_cols(scores), inv_tau);
  return detail::neg_log_softmax_at0(logits);
}

// Batch mean of the single-anchor global losses.
template <class Scalar>
Var<Scalar> global_cl_loss(Tape<Scalar>& tape, const std::vector<Var<Scalar>>& e_hr,
                           const std::vector<Var<Scalar>>& e_t_pos,
                           const std::vector<std::vector<Var<Scalar>>>& negatives,
                           Var<Scalar> inv_tau) {
  const std::size_t n = e_hr.size();
  require(n >= 1, "global_cl_loss: empty batch");
  require(n == e_t_pos.size() && n == negatives.size(),
          "global_cl_loss: batch size mismatch");
  std::vector<Var<Scalar>> per_anchor;
  per_anchor.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    per_anchor.push_back(
        global_cl_loss_single(tape, e_hr[i], e_t_pos[i], negatives[i], inv_tau));
  return mean_all(concat_cols(per_anchor));
}

// w1 * local + w2 * global.
template <class Scalar>
Var<Scalar> combined_cl_loss(Var<Scalar> local, Var<Scalar> global, Scalar w1, Scalar w2) {
  require(w1 >= Scalar(0) && w2 >= Scalar(0), "combined_cl_loss: weights must be >= 0");
  return add(scale(local, w1), scale(global, w2));
}

// L_TC + L_CL.
template <class Scalar>
Var<Scalar> overall_loss(Var<Scalar> l_tc, Var<Scalar> l_cl) {
  return add(l_tc, l_cl);
}

}  // namespace sasa
