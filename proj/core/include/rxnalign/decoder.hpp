#pragma once

// Sequence decoder and pooled regression head.  Both attend into the
// concatenated reactant/product atom features of one reaction; half of the
// attention heads (rounded down) are restricted to reaction-center atoms,
// jointly across the two graphs.

#include <cstdint>
#include <vector>

#include "rxnalign/attention.hpp"
#include "rxnalign/encoder.hpp"
#include "rxnalign/rng.hpp"

namespace rxnalign {

// Per-reaction attention memory: encoder outputs for one reaction stacked
// reactant-then-product, with the matching reaction-center key mask.
struct RcMemory {
  nd::Tensor keys;
  std::vector<std::uint8_t> rc_allow;
};

RcMemory reaction_memory(const EncodeResult& enc, const ReactionBatch& batch,
                         std::int64_t graph);

// First ceil(heads/2) heads attend everywhere; the rest only to center atoms.
inline int restricted_head_start(int heads, bool vanilla) {
  return vanilla ? heads : (heads + 1) / 2;
}

struct DecoderConfig {
  std::int64_t hidden = 128;
  int layers = 3;
  int heads = 8;
  double dropout = 0.0;
  std::int64_t max_len = 64;
  bool vanilla_cross = false;  // ablation: no reaction-center restriction
};

struct DecoderLayerParams {
  AttnParams self_attn;
  LayerNormParams ln_self;
  AttnParams cross_attn;
  LayerNormParams ln_cross;
  FfnParams ff;
  LayerNormParams ln_ff;
};

struct DecoderParams {
  DecoderConfig cfg;
  nd::Tensor tok_embed;  // (vocab, d)
  nd::Tensor pos_embed;  // (max_len, d)
  std::vector<DecoderLayerParams> layers;
  LinearParams out;  // (d -> vocab)
};

DecoderParams make_decoder(const DecoderConfig& cfg, std::int64_t vocab,
                           std::uint64_t key);
void register_decoder(DecoderParams& p, nd::ParamMap& map,
                      const std::string& prefix);

// Teacher-forced pass over inputs (beginning with the begin token); returns
// (len, vocab) logits.  Captures, when given, receive the last layer's cross
// attention weights.
nd::Tensor decode_tokens(const std::vector<int>& inputs, const RcMemory& mem,
                         const DecoderParams& p, nd::DropKeys* keys = nullptr,
                         AttnCapture* capture = nullptr);

struct BeamOptions {
  int width = 10;
  int results = 10;
  std::int64_t max_len = 0;  // 0: use the decoder's limit
};

struct BeamHyp {
  std::vector<int> tokens;  // without the begin token; ends with end on finish
  double sum_logp = 0;
  double score = 0;  // sum_logp / generated length
  bool finished = false;
};

// Beam search with length-normalized ranking and lexicographic tie breaks.
std::vector<BeamHyp> beam_search(const RcMemory& mem, const DecoderParams& p,
                                 const BeamOptions& opts);

struct PooledHeadParams {
  nd::Tensor query;  // (1, d)
  AttnParams attn;
  FfnParams out;  // (d -> 1)
  bool vanilla_cross = false;
};

PooledHeadParams make_pooled_head(std::int64_t dim, int heads, bool vanilla,
                                  std::uint64_t key);
void register_pooled_head(PooledHeadParams& p, nd::ParamMap& map,
                          const std::string& prefix);

// Learned-query attention over the reaction memory followed by a small FFN;
// returns a (1, 1) tensor.
nd::Tensor pooled_scalar(const RcMemory& mem, const PooledHeadParams& p,
                         nd::DropKeys* keys = nullptr,
                         AttnCapture* capture = nullptr);

}  // namespace rxnalign
