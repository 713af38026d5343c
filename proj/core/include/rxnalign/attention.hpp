#pragma once

// Small trainable layers shared by the encoder and decoder: linear / FFN /
// layer norm wrappers and multi-head attention with causal or key-restricted
// masking.

#include <cstdint>
#include <string>
#include <vector>

#include "rxnalign/ops.hpp"
#include "rxnalign/params.hpp"

namespace rxnalign {

struct LinearParams {
  nd::Tensor w;  // (in, out)
  nd::Tensor b;  // (out); may be left undefined for a pure projection
};

LinearParams make_linear(std::int64_t in, std::int64_t out, bool bias,
                         std::uint64_t key);
void register_linear(LinearParams& p, nd::ParamMap& map,
                     const std::string& prefix);
nd::Tensor linear(const nd::Tensor& x, const LinearParams& p);

struct FfnParams {
  LinearParams l1, l2;
};

FfnParams make_ffn(std::int64_t in, std::int64_t hidden, std::int64_t out,
                   std::uint64_t key);
void register_ffn(FfnParams& p, nd::ParamMap& map, const std::string& prefix);
nd::Tensor ffn(const nd::Tensor& x, const FfnParams& p);

struct LayerNormParams {
  nd::Tensor gain, bias;
};

LayerNormParams make_layer_norm(std::int64_t dim);
void register_layer_norm(LayerNormParams& p, nd::ParamMap& map,
                         const std::string& prefix);
nd::Tensor layer_norm(const nd::Tensor& x, const LayerNormParams& p);

// Residual add then normalize (post-norm arrangement).
nd::Tensor add_norm(const nd::Tensor& x, const nd::Tensor& sub,
                    const LayerNormParams& p);

struct AttnParams {
  nd::Tensor wq, wk, wv, wo;  // all (dim, dim)
  int heads = 1;
};

AttnParams make_attn(std::int64_t dim, int heads, std::uint64_t key);
void register_attn(AttnParams& p, nd::ParamMap& map, const std::string& prefix);

struct AttnOptions {
  bool causal = false;
  // Heads at index >= restricted_from see only keys with key_allow[j] != 0.
  // When no key is allowed the restricted heads fall back to the full key
  // set and the fallback counter is bumped.
  int restricted_from = 1 << 30;
  const std::vector<std::uint8_t>* key_allow = nullptr;
};

struct AttnCapture {
  // Per head, row-major (queries x keys) attention weights.
  std::vector<std::vector<double>> head_probs;
  std::int64_t queries = 0, keys = 0;
};

nd::Tensor multihead_attention(const nd::Tensor& q_in, const nd::Tensor& k_in,
                               const nd::Tensor& v_in, const AttnParams& p,
                               const AttnOptions& opts = {},
                               AttnCapture* capture = nullptr);

// Number of times restricted heads ran unrestricted because the allowed key
// set was empty, since the last reset.
long attention_fallback_count();
void reset_attention_fallback_count();

}  // namespace rxnalign
