#include "rxnalign/attention.hpp"

#include <atomic>
#include <cmath>

#include "rxnalign/rng.hpp"

namespace rxnalign {

using nd::Tensor;

LinearParams make_linear(std::int64_t in, std::int64_t out, bool bias,
                         std::uint64_t key) {
  LinearParams p;
  p.w = nd::glorot({in, out}, nd::mix_keys(key, 1));
  if (bias) p.b = nd::Tensor::zeros({out}, true);
  return p;
}

void register_linear(LinearParams& p, nd::ParamMap& map,
                     const std::string& prefix) {
  map.add(prefix + ".w", p.w);
  if (p.b.defined()) map.add(prefix + ".b", p.b);
}

Tensor linear(const Tensor& x, const LinearParams& p) {
  Tensor y = nd::matmul(x, p.w);
  if (p.b.defined()) y = nd::add_bias(y, p.b);
  return y;
}

FfnParams make_ffn(std::int64_t in, std::int64_t hidden, std::int64_t out,
                   std::uint64_t key) {
  FfnParams p;
  p.l1 = make_linear(in, hidden, true, nd::mix_keys(key, 11));
  p.l2 = make_linear(hidden, out, true, nd::mix_keys(key, 12));
  return p;
}

void register_ffn(FfnParams& p, nd::ParamMap& map, const std::string& prefix) {
  register_linear(p.l1, map, prefix + ".l1");
  register_linear(p.l2, map, prefix + ".l2");
}

Tensor ffn(const Tensor& x, const FfnParams& p) {
  return linear(nd::relu(linear(x, p.l1)), p.l2);
}

LayerNormParams make_layer_norm(std::int64_t dim) {
  LayerNormParams p;
  p.gain = nd::Tensor::full({dim}, 1.0, true);
  p.bias = nd::Tensor::zeros({dim}, true);
  return p;
}

void register_layer_norm(LayerNormParams& p, nd::ParamMap& map,
                         const std::string& prefix) {
  map.add(prefix + ".gain", p.gain);
  map.add(prefix + ".bias", p.bias);
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
  return nd::layer_norm(x, p.gain, p.bias);
}

Tensor add_norm(const Tensor& x, const Tensor& sub, const LayerNormParams& p) {
  return layer_norm(nd::add(x, sub), p);
}

AttnParams make_attn(std::int64_t dim, int heads, std::uint64_t key) {
  if (heads <= 0 || dim % heads != 0)
    throw nd::NdError("attention width must divide evenly across heads");
  AttnParams p;
  p.wq = nd::glorot({dim, dim}, nd::mix_keys(key, 21));
  p.wk = nd::glorot({dim, dim}, nd::mix_keys(key, 22));
  p.wv = nd::glorot({dim, dim}, nd::mix_keys(key, 23));
  p.wo = nd::glorot({dim, dim}, nd::mix_keys(key, 24));
  p.heads = heads;
  return p;
}

void register_attn(AttnParams& p, nd::ParamMap& map,
                   const std::string& prefix) {
  map.add(prefix + ".wq", p.wq);
  map.add(prefix + ".wk", p.wk);
  map.add(prefix + ".wv", p.wv);
  map.add(prefix + ".wo", p.wo);
}

namespace {
std::atomic<long> g_fallbacks{0};
}

long attention_fallback_count() { return g_fallbacks.load(); }
void reset_attention_fallback_count() { g_fallbacks.store(0); }

Tensor multihead_attention(const Tensor& q_in, const Tensor& k_in,
                           const Tensor& v_in, const AttnParams& p,
                           const AttnOptions& opts, AttnCapture* capture) {
  std::int64_t t = q_in.dim(0);
  std::int64_t s = k_in.dim(0);
  std::int64_t d = q_in.dim(1);
  if (p.wq.dim(0) != d)
    throw nd::NdError("attention width mismatch");
  if (k_in.dim(0) != v_in.dim(0))
    throw nd::NdError("key/value row mismatch");
  std::int64_t dk = d / p.heads;
  double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  bool restricted_possible =
      opts.key_allow != nullptr && opts.restricted_from < p.heads;
  bool have_allowed = false;
  if (restricted_possible) {
    if (static_cast<std::int64_t>(opts.key_allow->size()) != s)
      throw nd::NdError("attention key mask size mismatch");
    for (std::uint8_t a : *opts.key_allow) have_allowed |= a != 0;
    if (!have_allowed) ++g_fallbacks;
  }

  std::vector<std::uint8_t> causal_mask;
  if (opts.causal) {
    causal_mask.assign(static_cast<std::size_t>(t * s), 0);
    for (std::int64_t i = 0; i < t; ++i)
      for (std::int64_t j = 0; j <= i && j < s; ++j)
        causal_mask[i * s + j] = 1;
  }
  std::vector<std::uint8_t> restricted_mask;
  if (restricted_possible && have_allowed) {
    restricted_mask.assign(static_cast<std::size_t>(t * s), 0);
    for (std::int64_t i = 0; i < t; ++i)
      for (std::int64_t j = 0; j < s; ++j)
        restricted_mask[i * s + j] = (*opts.key_allow)[j];
  }

  if (capture) {
    capture->head_probs.clear();
    capture->queries = t;
    capture->keys = s;
  }

  std::vector<Tensor> outs;
  outs.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    Tensor qh = nd::matmul(q_in, nd::slice_cols(p.wq, h * dk, dk));
    Tensor kh = nd::matmul(k_in, nd::slice_cols(p.wk, h * dk, dk));
    Tensor vh = nd::matmul(v_in, nd::slice_cols(p.wv, h * dk, dk));
    Tensor scores = nd::scale(nd::matmul(qh, nd::transpose(kh)), inv_sqrt);
    Tensor probs;
    bool use_restricted =
        restricted_possible && have_allowed && h >= opts.restricted_from;
    if (opts.causal) {
      probs = nd::masked_softmax(scores, causal_mask);
    } else if (use_restricted) {
      probs = nd::masked_softmax(scores, restricted_mask);
    } else {
      probs = nd::softmax(scores);
    }
    if (capture) capture->head_probs.push_back(probs.data());
    outs.push_back(nd::matmul(probs, vh));
  }
  Tensor merged = p.heads == 1 ? outs.front() : nd::concat_cols(outs);
  return nd::matmul(merged, p.wo);
}

}  // namespace rxnalign
