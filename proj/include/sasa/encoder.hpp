// SPDX-License-Identifier: Apache-2.0
//
// Transformer text encoder tower: token + learned positional + segment
// embeddings followed by post-norm self-attention blocks. Two towers with
// disjoint parameter sets encode the head-relation pair and the tail entity.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sasa/params.hpp"
#include "sasa/tape.hpp"
#include "sasa/text.hpp"

namespace sasa {

enum class Tower { HeadRelation, Tail };

struct EncoderConfig {
  int d = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 256;
  int max_len = 128;
  int vocab_size = 0;
  double dropout_rate = 0.1;
  Tower tower = Tower::HeadRelation;

  void validate() const {
    require(d > 0 && n_layers > 0 && n_heads > 0 && d_ff > 0, "encoder dims must be positive");
    require(d % n_heads == 0, "hidden size must be divisible by n_heads");
    require(max_len >= 3, "max_len too small");
    require(vocab_size >= Vocabulary::kReservedCount, "vocab_size too small");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must be in [0, 1)");
  }
};

// Additive attention bias: 0 on active keys, -1e9 on padding, so padded keys
// underflow to exactly zero probability inside the softmax.
template <class Scalar>
Matrix<Scalar> additive_attention_mask(const std::vector<int>& mask) {
  Matrix<Scalar> m(1, static_cast<Index>(mask.size()));
  for (std::size_t j = 0; j < mask.size(); ++j)
    m(0, static_cast<Index>(j)) = mask[j] ? Scalar(0) : Scalar(-1e9);
  return m;
}

template <class Scalar>
class TransformerEncoder {
 public:
  struct LayerBinding {
    Var<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
    Var<Scalar> ln1_g, ln1_b;
    Var<Scalar> w1, b1, w2, b2;
    Var<Scalar> ln2_g, ln2_b;
  };
  struct Binding {
    Var<Scalar> tok, pos, seg, emb_ln_g, emb_ln_b;
    std::vector<LayerBinding> layers;
  };

  TransformerEncoder(const EncoderConfig& cfg, const std::string& prefix,
                     ParameterStore<Scalar>& store, Rng& init)
      : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.d;
    const double sd = 0.02;
    tok_ = store.create_normal(prefix + ".tok_emb", cfg_.vocab_size, d, init, sd, true);
    pos_ = store.create_normal(prefix + ".pos_emb", cfg_.max_len, d, init, sd, true);
    seg_ = store.create_normal(prefix + ".seg_emb", 2, d, init, sd, true);
    emb_ln_g_ = store.create_constant(prefix + ".emb_ln.gain", 1, d, Scalar(1));
    emb_ln_b_ = store.create_constant(prefix + ".emb_ln.bias", 1, d, Scalar(0));
    for (int l = 0; l < cfg_.n_layers; ++l) {
      const std::string lp = prefix + ".layer" + std::to_string(l);
      LayerParams lay;
      lay.wq = store.create_normal(lp + ".attn.wq", d, d, init, sd, true);
      lay.bq = store.create_constant(lp + ".attn.bq", 1, d, Scalar(0));
      lay.wk = store.create_normal(lp + ".attn.wk", d, d, init, sd, true);
      lay.bk = store.create_constant(lp + ".attn.bk", 1, d, Scalar(0));
      lay.wv = store.create_normal(lp + ".attn.wv", d, d, init, sd, true);
      lay.bv = store.create_constant(lp + ".attn.bv", 1, d, Scalar(0));
      lay.wo = store.create_normal(lp + ".attn.wo", d, d, init, sd, true);
      lay.bo = store.create_constant(lp + ".attn.bo", 1, d, Scalar(0));
      lay.ln1_g = store.create_constant(lp + ".ln1.gain", 1, d, Scalar(1));
      lay.ln1_b = store.create_constant(lp + ".ln1.bias", 1, d, Scalar(0));
      lay.w1 = store.create_normal(lp + ".ffn.w1", d, cfg_.d_ff, init, sd, true);
      lay.b1 = store.create_constant(lp + ".ffn.b1", 1, cfg_.d_ff, Scalar(0));
      lay.w2 = store.create_normal(lp + ".ffn.w2", cfg_.d_ff, d, init, sd, true);
      lay.b2 = store.create_constant(lp + ".ffn.b2", 1, d, Scalar(0));
      lay.ln2_g = store.create_constant(lp + ".ln2.gain", 1, d, Scalar(1));
      lay.ln2_b = store.create_constant(lp + ".ln2.bias", 1, d, Scalar(0));
      layers_.push_back(lay);
    }
  }

  const EncoderConfig& config() const { return cfg_; }

  Binding bind(Tape<Scalar>& tape, bool trainable) const {
    Binding b;
    b.tok = tape.leaf(*tok_, trainable);
    b.pos = tape.leaf(*pos_, trainable);
    b.seg = tape.leaf(*seg_, trainable);
    b.emb_ln_g = tape.leaf(*emb_ln_g_, trainable);
    b.emb_ln_b = tape.leaf(*emb_ln_b_, trainable);
    for (const LayerParams& lay : layers_) {
      LayerBinding lb;
      lb.wq = tape.leaf(*lay.wq, trainable);
      lb.bq = tape.leaf(*lay.bq, trainable);
      lb.wk = tape.leaf(*lay.wk, trainable);
      lb.bk = tape.leaf(*lay.bk, trainable);
      lb.wv = tape.leaf(*lay.wv, trainable);
      lb.bv = tape.leaf(*lay.bv, trainable);
      lb.wo = tape.leaf(*lay.wo, trainable);
      lb.bo = tape.leaf(*lay.bo, trainable);
      lb.ln1_g = tape.leaf(*lay.ln1_g, trainable);
      lb.ln1_b = tape.leaf(*lay.ln1_b, trainable);
      lb.w1 = tape.leaf(*lay.w1, trainable);
      lb.b1 = tape.leaf(*lay.b1, trainable);
      lb.w2 = tape.leaf(*lay.w2, trainable);
      lb.b2 = tape.leaf(*lay.b2, trainable);
      lb.ln2_g = tape.leaf(*lay.ln2_g, trainable);
      lb.ln2_b = tape.leaf(*lay.ln2_b, trainable);
      b.layers.push_back(lb);
    }
    return b;
  }

  // Last-layer hidden states, max_len x d. Rows at padded positions carry
  // values but are ignored downstream via the attention / pooling masks.
  Var<Scalar> forward(Tape<Scalar>& tape, const Binding& b, const TokenSequence& seq,
                      bool train, SeedStream& seeds) const {
    const int L = cfg_.max_len;
    require(static_cast<int>(seq.token_ids.size()) == L &&
                static_cast<int>(seq.segment_ids.size()) == L &&
                static_cast<int>(seq.attention_mask.size()) == L,
            "encode_tokens: sequence length does not match max_len");
    const Scalar rate = static_cast<Scalar>(cfg_.dropout_rate);

    Var<Scalar> x = add(add(embedding_rows(b.tok, seq.token_ids),
                            slice_rows(b.pos, 0, L)),
                        embedding_rows(b.seg, seq.segment_ids));
    x = layer_norm_affine(x, b.emb_ln_g, b.emb_ln_b);
    x = dropout(x, rate, train, seeds.next());

    const Matrix<Scalar> key_bias = additive_attention_mask<Scalar>(seq.attention_mask);
    const int dh = cfg_.d / cfg_.n_heads;
    const Scalar inv_sqrt_dh = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

    for (const LayerBinding& lb : b.layers) {
      Var<Scalar> q = add_rowvec(matmul(x, lb.wq), lb.bq);
      Var<Scalar> k = add_rowvec(matmul(x, lb.wk), lb.bk);
      Var<Scalar> v = add_rowvec(matmul(x, lb.wv), lb.bv);

      std::vector<Var<Scalar>> heads;
      heads.reserve(cfg_.n_heads);
      for (int h = 0; h < cfg_.n_heads; ++h) {
        Var<Scalar> qh = slice_cols(q, h * dh, dh);
        Var<Scalar> kh = slice_cols(k, h * dh, dh);
        Var<Scalar> vh = slice_cols(v, h * dh, dh);
        Var<Scalar> scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
        Var<Scalar> probs = softmax_rows_masked(scores, key_bias);
        probs = dropout(probs, rate, train, seeds.next());
        heads.push_back(matmul(probs, vh));
      }
      Var<Scalar> attn = add_rowvec(matmul(concat_cols(heads), lb.wo), lb.bo);
      attn = dropout(attn, rate, train, seeds.next());
      x = layer_norm_affine(add(x, attn), lb.ln1_g, lb.ln1_b);

      Var<Scalar> ff = gelu(add_rowvec(matmul(x, lb.w1), lb.b1));
      ff = add_rowvec(matmul(ff, lb.w2), lb.b2);
      ff = dropout(ff, rate, train, seeds.next());
      x = layer_norm_affine(add(x, ff), lb.ln2_g, lb.ln2_b);
    }
    return x;
  }

 private:
  struct LayerParams {
    Parameter<Scalar> *wq = nullptr, *bq = nullptr, *wk = nullptr, *bk = nullptr;
    Parameter<Scalar> *wv = nullptr, *bv = nullptr, *wo = nullptr, *bo = nullptr;
    Parameter<Scalar> *ln1_g = nullptr, *ln1_b = nullptr;
    Parameter<Scalar> *w1 = nullptr, *b1 = nullptr, *w2 = nullptr, *b2 = nullptr;
    Parameter<Scalar> *ln2_g = nullptr, *ln2_b = nullptr;
  };

  EncoderConfig cfg_;
  Parameter<Scalar>*tok_ = nullptr, *pos_ = nullptr, *seg_ = nullptr;
  Parameter<Scalar>*emb_ln_g_ = nullptr, *emb_ln_b_ = nullptr;
  std::vector<LayerParams> layers_;
};

// Mean of the mask-active token states followed by L2 normalization; the
// pooled sequence embedding used everywhere downstream.
template <class Scalar>
Var<Scalar> pool(Var<Scalar> states, const std::vector<int>& mask) {
  return l2_normalize_rows(mean_pool_rows(states, mask));
}

}  // namespace sasa
