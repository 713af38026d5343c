#include "rxnalign/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "rxnalign/vocab.hpp"

namespace rxnalign {

using nd::Tensor;

RcMemory reaction_memory(const EncodeResult& enc, const ReactionBatch& batch,
                         std::int64_t graph) {
  const GraphSlice& rs = batch.reactant.slices.at(graph);
  const GraphSlice& ps = batch.product.slices.at(graph);
  RcMemory mem;
  mem.keys = nd::concat_rows({nd::slice_rows(enc.reactant, rs.node_offset, rs.nodes),
                              nd::slice_rows(enc.product, ps.node_offset, ps.nodes)});
  mem.rc_allow.reserve(rs.nodes + ps.nodes);
  for (std::int64_t i = 0; i < rs.nodes; ++i)
    mem.rc_allow.push_back(batch.rc_reactant[rs.node_offset + i]);
  for (std::int64_t i = 0; i < ps.nodes; ++i)
    mem.rc_allow.push_back(batch.rc_product[ps.node_offset + i]);
  return mem;
}

DecoderParams make_decoder(const DecoderConfig& cfg, std::int64_t vocab,
                           std::uint64_t key) {
  DecoderParams p;
  p.cfg = cfg;
  p.tok_embed = nd::gaussian_init({vocab, cfg.hidden}, 0.1, nd::mix_keys(key, 1));
  p.pos_embed =
      nd::gaussian_init({cfg.max_len, cfg.hidden}, 0.1, nd::mix_keys(key, 2));
  for (int l = 0; l < cfg.layers; ++l) {
    DecoderLayerParams layer;
    std::uint64_t lk = nd::mix_keys(key, 100 + l);
    layer.self_attn = make_attn(cfg.hidden, cfg.heads, nd::mix_keys(lk, 1));
    layer.ln_self = make_layer_norm(cfg.hidden);
    layer.cross_attn = make_attn(cfg.hidden, cfg.heads, nd::mix_keys(lk, 2));
    layer.ln_cross = make_layer_norm(cfg.hidden);
    layer.ff = make_ffn(cfg.hidden, 2 * cfg.hidden, cfg.hidden,
                        nd::mix_keys(lk, 3));
    layer.ln_ff = make_layer_norm(cfg.hidden);
    p.layers.push_back(std::move(layer));
  }
  p.out = make_linear(cfg.hidden, vocab, true, nd::mix_keys(key, 3));
  return p;
}

void register_decoder(DecoderParams& p, nd::ParamMap& map,
                      const std::string& prefix) {
  map.add(prefix + ".tok_embed", p.tok_embed);
  map.add(prefix + ".pos_embed", p.pos_embed);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    std::string lp = prefix + ".layer" + std::to_string(l);
    register_attn(p.layers[l].self_attn, map, lp + ".self");
    register_layer_norm(p.layers[l].ln_self, map, lp + ".ln_self");
    register_attn(p.layers[l].cross_attn, map, lp + ".cross");
    register_layer_norm(p.layers[l].ln_cross, map, lp + ".ln_cross");
    register_ffn(p.layers[l].ff, map, lp + ".ff");
    register_layer_norm(p.layers[l].ln_ff, map, lp + ".ln_ff");
  }
  register_linear(p.out, map, prefix + ".out");
}

Tensor decode_tokens(const std::vector<int>& inputs, const RcMemory& mem,
                     const DecoderParams& p, nd::DropKeys* keys,
                     AttnCapture* capture) {
  std::int64_t t = static_cast<std::int64_t>(inputs.size());
  if (t == 0) throw nd::NdError("decode_tokens: empty input");
  if (t > p.cfg.max_len)
    throw nd::NdError("decode_tokens: sequence longer than max_len");
  nd::Index idx(inputs.begin(), inputs.end());
  Tensor x = nd::add(nd::gather_rows(p.tok_embed, idx),
                     nd::slice_rows(p.pos_embed, 0, t));

  AttnOptions self_opts;
  self_opts.causal = true;
  AttnOptions cross_opts;
  cross_opts.restricted_from =
      restricted_head_start(p.cfg.heads, p.cfg.vanilla_cross);
  cross_opts.key_allow = &mem.rc_allow;

  auto drop = [&](const Tensor& v) {
    return keys ? nd::dropout(v, keys->rate, keys->train, keys->next()) : v;
  };

  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const DecoderLayerParams& layer = p.layers[l];
    bool last = l + 1 == p.layers.size();
    Tensor sa = multihead_attention(x, x, x, layer.self_attn, self_opts);
    x = add_norm(x, drop(sa), layer.ln_self);
    Tensor ca = multihead_attention(x, mem.keys, mem.keys, layer.cross_attn,
                                    cross_opts, last ? capture : nullptr);
    x = add_norm(x, drop(ca), layer.ln_cross);
    Tensor ff = ffn(x, layer.ff);
    x = add_norm(x, drop(ff), layer.ln_ff);
  }
  return linear(x, p.out);
}

namespace {

std::vector<double> last_row_log_softmax(const Tensor& logits) {
  std::int64_t t = logits.dim(0), v = logits.dim(1);
  const auto& data = logits.data();
  const double* row = data.data() + (t - 1) * v;
  double mx = -HUGE_VAL;
  for (std::int64_t j = 0; j < v; ++j) mx = std::max(mx, row[j]);
  double z = 0;
  for (std::int64_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
  double lse = mx + std::log(z);
  std::vector<double> out(static_cast<std::size_t>(v));
  for (std::int64_t j = 0; j < v; ++j) out[j] = row[j] - lse;
  return out;
}

bool hyp_before(const BeamHyp& a, const BeamHyp& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<BeamHyp> beam_search(const RcMemory& mem, const DecoderParams& p,
                                 const BeamOptions& opts) {
  if (opts.width <= 0) throw nd::NdError("beam width must be positive");
  std::int64_t max_len = opts.max_len > 0 ? opts.max_len : p.cfg.max_len - 1;

  struct State {
    std::vector<int> tokens;  // generated, no begin token
    double sum_logp = 0;
    bool finished = false;
  };
  std::vector<State> beam{State{}};

  for (std::int64_t step = 0; step < max_len; ++step) {
    std::vector<State> candidates;
    bool any_live = false;
    for (const State& st : beam) {
      if (st.finished) {
        candidates.push_back(st);
        continue;
      }
      any_live = true;
      std::vector<int> inputs;
      inputs.reserve(st.tokens.size() + 1);
      inputs.push_back(Vocabulary::kBos);
      inputs.insert(inputs.end(), st.tokens.begin(), st.tokens.end());
      Tensor logits = decode_tokens(inputs, mem, p);
      std::vector<double> logp = last_row_log_softmax(logits);
      for (std::size_t tok = 0; tok < logp.size(); ++tok) {
        State next = st;
        next.tokens.push_back(static_cast<int>(tok));
        next.sum_logp += logp[tok];
        next.finished = static_cast<int>(tok) == Vocabulary::kEos;
        candidates.push_back(std::move(next));
      }
    }
    if (!any_live) break;
    std::sort(candidates.begin(), candidates.end(),
              [](const State& a, const State& b) {
                if (a.sum_logp != b.sum_logp) return a.sum_logp > b.sum_logp;
                return a.tokens < b.tokens;
              });
    if (static_cast<int>(candidates.size()) > opts.width)
      candidates.resize(opts.width);
    beam = std::move(candidates);
  }

  std::vector<BeamHyp> out;
  for (const State& st : beam) {
    if (st.tokens.empty()) continue;
    BeamHyp hyp;
    hyp.tokens = st.tokens;
    hyp.sum_logp = st.sum_logp;
    hyp.finished = st.finished;
    hyp.score = st.sum_logp / static_cast<double>(st.tokens.size());
    out.push_back(std::move(hyp));
  }
  std::sort(out.begin(), out.end(), hyp_before);
  if (static_cast<int>(out.size()) > opts.results) out.resize(opts.results);
  return out;
}

PooledHeadParams make_pooled_head(std::int64_t dim, int heads, bool vanilla,
                                  std::uint64_t key) {
  PooledHeadParams p;
  p.query = nd::gaussian_init({1, dim}, 0.1, nd::mix_keys(key, 1));
  p.attn = make_attn(dim, heads, nd::mix_keys(key, 2));
  p.out = make_ffn(dim, dim, 1, nd::mix_keys(key, 3));
  p.vanilla_cross = vanilla;
  return p;
}

void register_pooled_head(PooledHeadParams& p, nd::ParamMap& map,
                          const std::string& prefix) {
  map.add(prefix + ".query", p.query);
  register_attn(p.attn, map, prefix + ".attn");
  register_ffn(p.out, map, prefix + ".out");
}

Tensor pooled_scalar(const RcMemory& mem, const PooledHeadParams& p,
                     nd::DropKeys* keys, AttnCapture* capture) {
  AttnOptions opts;
  opts.restricted_from =
      restricted_head_start(p.attn.heads, p.vanilla_cross);
  opts.key_allow = &mem.rc_allow;
  Tensor pooled =
      multihead_attention(p.query, mem.keys, mem.keys, p.attn, opts, capture);
  if (keys) pooled = nd::dropout(pooled, keys->rate, keys->train, keys->next());
  return ffn(pooled, p.out);
}

}  // namespace rxnalign
