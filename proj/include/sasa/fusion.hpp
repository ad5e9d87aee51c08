// SPDX-License-Identifier: Apache-2.0
//
// Separated attention: shared projection of the decoupled tower outputs into
// one space, cross-attention with the projected tail embedding as the single
// query over projected head-relation token states, and the binary classifier.

#pragma once

#include <cmath>
#include <vector>

#include "sasa/encoder.hpp"
#include "sasa/tape.hpp"

namespace sasa {

template <class Scalar>
struct ProjectionBinding {
  Var<Scalar> w1, b1, w2, b2;  // d -> 2d -> d, shared by both inputs
};

template <class Scalar>
struct CrossAttentionBinding {
  Var<Scalar> wq, wk, wv;  // d x d, no bias
};

// W2(Dropout(LayerNorm(GELU(W1 x + b1)))) + b2, applied row-wise. The layer
// norm carries no affine parameters; the projection owns only the two linear
// maps.
template <class Scalar>
Var<Scalar> project(Var<Scalar> x, const ProjectionBinding<Scalar>& p, Scalar rate,
                    bool train, std::uint64_t seed) {
  Var<Scalar> h = add_rowvec(matmul(x, p.w1), p.b1);
  h = layer_norm(gelu(h));
  h = dropout(h, rate, train, seed);
  return add_rowvec(matmul(h, p.w2), p.b2);
}

// Single-query, single-head cross attention. Padded key rows are masked
// additively and receive exactly zero weight.
template <class Scalar>
Var<Scalar> cross_attend(Var<Scalar> tail_query, Var<Scalar> hr_states,
                         const std::vector<int>& mask,
                         const CrossAttentionBinding<Scalar>& p) {
  require(tail_query.rows() == 1, "cross_attend: query must be a single row");
  require(static_cast<Index>(mask.size()) == hr_states.rows(),
          "cross_attend: mask length != key rows");
  int active = 0;
  for (int m : mask) active += (m != 0);
  require(active > 0, "cross_attend: all keys masked");

  const Scalar inv_sqrt_d = Scalar(1) / std::sqrt(static_cast<Scalar>(tail_query.cols()));
  Var<Scalar> q = matmul(tail_query, p.wq);
  Var<Scalar> k = matmul(hr_states, p.wk);
  Var<Scalar> v = matmul(hr_states, p.wv);
  Var<Scalar> scores = scale(matmul(q, transpose(k)), inv_sqrt_d);
  Var<Scalar> weights = softmax_rows_masked(scores, additive_attention_mask<Scalar>(mask));
  return matmul(weights, v);
}

// Softmax over the two logits of h W_tc^T; output [y0_invalid, y1_valid].
template <class Scalar>
Var<Scalar> classify(Var<Scalar> h, Var<Scalar> w_tc) {
  require(w_tc.rows() == 2, "classify: W_TC must be 2 x d");
  return softmax_rows(matmul(h, transpose(w_tc)));
}

// Argmax with ties resolved to invalid.
template <class Scalar>
int predicted_label(const Matrix<Scalar>& probs) {
  return probs(0, 1) > probs(0, 0) ? 1 : 0;
}

// Binary cross entropy summed over the batch; probabilities are clamped to
// [eps, 1 - eps] before the log.
template <class Scalar>
Var<Scalar> tc_loss(Tape<Scalar>& tape, const std::vector<Var<Scalar>>& predictions,
                    const std::vector<int>& labels, Scalar eps = Scalar(1e-12)) {
  require(!predictions.empty(), "tc_loss: empty batch");
  require(predictions.size() == labels.size(), "tc_loss: batch size mismatch");
  std::vector<Var<Scalar>> log_probs;
  log_probs.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "tc_loss: label must be 0 or 1");
    Var<Scalar> p = pick(predictions[i], 0, labels[i]);
    log_probs.push_back(log_elem(clamp(p, eps, Scalar(1) - eps)));
  }
  return neg(sum_all(concat_cols(log_probs)));
}

}  // namespace sasa
