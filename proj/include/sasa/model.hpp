// SPDX-License-Identifier: Apache-2.0
//
// The full SASA model: two parameter-separated encoder towers, the shared
// projection, cross-attention fusion, the 2-way classifier, a concatenation
// head for the vanilla ablation, and the learnable log-inverse-temperature.

#pragma once

#include <string>
#include <vector>

#include "sasa/contrastive.hpp"
#include "sasa/encoder.hpp"
#include "sasa/fusion.hpp"
#include "sasa/params.hpp"

namespace sasa {

struct ModelHyper {
  int d = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 128;
  int vocab_size = 0;
  double dropout = 0.1;

  EncoderConfig encoder_config(Tower tower) const {
    EncoderConfig c;
    c.d = d;
    c.n_layers = n_layers;
    c.n_heads = n_heads;
    c.d_ff = d_ff;
    c.max_len = max_len;
    c.vocab_size = vocab_size;
    c.dropout_rate = dropout;
    c.tower = tower;
    return c;
  }
};

template <class Scalar>
class SasaModel {
 public:
  struct Binding {
    typename TransformerEncoder<Scalar>::Binding hr, tail;
    ProjectionBinding<Scalar> proj;
    CrossAttentionBinding<Scalar> attn;
    Var<Scalar> w_tc;      // 2 x d
    Var<Scalar> w_vanilla; // 2 x 2d
    Var<Scalar> lambda;    // 1 x 1
    Var<Scalar> inv_tau;   // exp(lambda), shared by both CL losses
  };

  SasaModel(const ModelHyper& hyper, std::uint64_t init_seed)
      : hyper_(hyper),
        init_rng_(mix_seed(init_seed, 0xC0DE)),
        hr_(hyper.encoder_config(Tower::HeadRelation), "hr", store_, init_rng_),
        tail_(hyper.encoder_config(Tower::Tail), "t", store_, init_rng_) {
    const int d = hyper_.d;
    proj_w1_ = store_.create_normal("proj.w1", d, 2 * d, init_rng_, 0.02, true);
    proj_b1_ = store_.create_constant("proj.b1", 1, 2 * d, Scalar(0));
    proj_w2_ = store_.create_normal("proj.w2", 2 * d, d, init_rng_, 0.02, true);
    proj_b2_ = store_.create_constant("proj.b2", 1, d, Scalar(0));
    attn_wq_ = store_.create_normal("attn.wq", d, d, init_rng_, 0.02, true);
    attn_wk_ = store_.create_normal("attn.wk", d, d, init_rng_, 0.02, true);
    attn_wv_ = store_.create_normal("attn.wv", d, d, init_rng_, 0.02, true);
    w_tc_ = store_.create_normal("cls.w_tc", 2, d, init_rng_, 0.02, true);
    w_vanilla_ = store_.create_normal("cls.w_vanilla", 2, 2 * d, init_rng_, 0.02, true);
    lambda_ = store_.create_constant("cl.lambda", 1, 1,
                                     Scalar(initial_log_inv_temperature()));
  }

  const ModelHyper& hyper() const { return hyper_; }
  ParameterStore<Scalar>& store() { return store_; }
  const ParameterStore<Scalar>& store() const { return store_; }
  Parameter<Scalar>* lambda() { return lambda_; }

  const TransformerEncoder<Scalar>& hr_tower() const { return hr_; }
  const TransformerEncoder<Scalar>& tail_tower() const { return tail_; }

  Binding bind(Tape<Scalar>& tape, bool trainable) const {
    Binding b;
    b.hr = hr_.bind(tape, trainable);
    b.tail = tail_.bind(tape, trainable);
    b.proj = ProjectionBinding<Scalar>{tape.leaf(*proj_w1_, trainable),
                                       tape.leaf(*proj_b1_, trainable),
                                       tape.leaf(*proj_w2_, trainable),
                                       tape.leaf(*proj_b2_, trainable)};
    b.attn = CrossAttentionBinding<Scalar>{tape.leaf(*attn_wq_, trainable),
                                           tape.leaf(*attn_wk_, trainable),
                                           tape.leaf(*attn_wv_, trainable)};
    b.w_tc = tape.leaf(*w_tc_, trainable);
    b.w_vanilla = tape.leaf(*w_vanilla_, trainable);
    b.lambda = tape.leaf(*lambda_, trainable);
    b.inv_tau = inverse_temperature(b.lambda);
    return b;
  }

  // Head-relation tower: last-layer token states plus the pooled embedding.
  struct HrEncoding {
    Var<Scalar> states;
    Var<Scalar> pooled;
  };
  HrEncoding encode_hr(Tape<Scalar>& tape, const Binding& b, const TokenSequence& seq,
                       bool train, SeedStream& seeds) const {
    Var<Scalar> states = hr_.forward(tape, b.hr, seq, train, seeds);
    return HrEncoding{states, pool(states, seq.attention_mask)};
  }

  Var<Scalar> encode_tail(Tape<Scalar>& tape, const Binding& b, const TokenSequence& seq,
                          bool train, SeedStream& seeds) const {
    return pool(tail_.forward(tape, b.tail, seq, train, seeds), seq.attention_mask);
  }

  // Separated-attention classification path (Eqs. 5-12): project both tower
  // outputs with the shared projection, fuse with the tail as query, classify.
  Var<Scalar> tc_probs_separated(Tape<Scalar>& tape, const Binding& b,
                                 const HrEncoding& hr, const TokenSequence& hr_seq,
                                 Var<Scalar> e_t, bool train, SeedStream& seeds) const {
    const Scalar rate = static_cast<Scalar>(hyper_.dropout);
    Var<Scalar> projected_states = project(hr.states, b.proj, rate, train, seeds.next());
    Var<Scalar> projected_tail = project(e_t, b.proj, rate, train, seeds.next());
    Var<Scalar> fused =
        cross_attend(projected_tail, projected_states, hr_seq.attention_mask, b.attn);
    return classify(fused, b.w_tc);
  }

  // Vanilla ablation path: concatenate the pooled embeddings and classify
  // with a fresh 2d -> 2 linear head.
  Var<Scalar> tc_probs_vanilla(Tape<Scalar>& tape, const Binding& b, Var<Scalar> e_hr,
                               Var<Scalar> e_t) const {
    std::vector<Var<Scalar>> parts{e_hr, e_t};
    return classify(concat_cols(parts), b.w_vanilla);
  }

 private:
  ModelHyper hyper_;
  Rng init_rng_;
  ParameterStore<Scalar> store_;
  TransformerEncoder<Scalar> hr_, tail_;
  Parameter<Scalar>*proj_w1_ = nullptr, *proj_b1_ = nullptr;
  Parameter<Scalar>*proj_w2_ = nullptr, *proj_b2_ = nullptr;
  Parameter<Scalar>*attn_wq_ = nullptr, *attn_wk_ = nullptr, *attn_wv_ = nullptr;
  Parameter<Scalar>*w_tc_ = nullptr, *w_vanilla_ = nullptr, *lambda_ = nullptr;
};

}  // namespace sasa
