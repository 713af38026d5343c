#include "rxnalign/encoder.hpp"

#include <numeric>

namespace rxnalign {

using nd::Tensor;

MpnnParams make_mpnn(std::int64_t dim, std::uint64_t key) {
  MpnnParams p;
  p.node = make_linear(dim, dim, true, nd::mix_keys(key, 1));
  p.edge = make_linear(dim, dim, true, nd::mix_keys(key, 2));
  p.attn = nd::glorot({3 * dim, 1}, nd::mix_keys(key, 3));
  p.self_edge = nd::gaussian_init({1, dim}, 0.1, nd::mix_keys(key, 4));
  return p;
}

void register_mpnn(MpnnParams& p, nd::ParamMap& map,
                   const std::string& prefix) {
  register_linear(p.node, map, prefix + ".node");
  register_linear(p.edge, map, prefix + ".edge");
  map.add(prefix + ".attn", p.attn);
  map.add(prefix + ".self_edge", p.self_edge);
}

Tensor mpnn_layer(const Tensor& h, const Tensor& e,
                  const std::vector<std::int64_t>& edge_dst,
                  const std::vector<std::int64_t>& edge_src,
                  const MpnnParams& p) {
  std::int64_t n = h.dim(0);
  std::int64_t dim = h.dim(1);
  std::int64_t ne = static_cast<std::int64_t>(edge_dst.size());
  if (e.defined() ? e.dim(0) != ne : ne != 0)
    throw nd::NdError("mpnn_layer: edge feature rows do not match edge list");

  Tensor hn = linear(h, p.node);
  Tensor self_row = linear(p.self_edge, p.edge);
  Tensor entries_e;
  std::vector<std::int64_t> entry_dst = edge_dst;
  std::vector<std::int64_t> entry_src = edge_src;
  entry_dst.reserve(ne + n);
  entry_src.reserve(ne + n);
  for (std::int64_t i = 0; i < n; ++i) {
    entry_dst.push_back(i);
    entry_src.push_back(i);
  }
  Tensor self_rows = nd::tile_rows(self_row, n);
  if (ne > 0) {
    Tensor ee = linear(e, p.edge);
    entries_e = nd::concat_rows({ee, self_rows});
  } else {
    entries_e = self_rows;
  }

  Tensor a_dst = nd::slice_rows(p.attn, 0, dim);
  Tensor a_src = nd::slice_rows(p.attn, dim, dim);
  Tensor a_edge = nd::slice_rows(p.attn, 2 * dim, dim);
  Tensor s_dst = nd::matmul(hn, a_dst);  // (n, 1)
  Tensor s_src = nd::matmul(hn, a_src);
  Tensor s_edge = nd::matmul(entries_e, a_edge);  // (ne + n, 1)
  Tensor logits = nd::add(
      nd::add(nd::gather_rows(s_dst, entry_dst), nd::gather_rows(s_src, entry_src)),
      s_edge);
  Tensor alpha =
      nd::segment_softmax(nd::leaky_relu(logits, 0.2), entry_dst, n);
  Tensor messages =
      nd::segment_sum_rows(nd::scale_rows(entries_e, alpha), entry_dst, n);
  return nd::add(hn, messages);
}

EmbeddingTables make_embedding_tables(std::int64_t dim, std::uint64_t key) {
  EmbeddingTables t;
  for (int i = 0; i < kAtomDescriptorCount; ++i)
    t.atom.push_back(nd::gaussian_init({kAtomTableSizes[i], dim}, 0.1,
                                       nd::mix_keys(key, 100 + i)));
  for (int i = 0; i < kBondDescriptorCount; ++i)
    t.bond.push_back(nd::gaussian_init({kBondTableSizes[i], dim}, 0.1,
                                       nd::mix_keys(key, 200 + i)));
  return t;
}

void register_embedding_tables(EmbeddingTables& t, nd::ParamMap& map,
                               const std::string& prefix) {
  for (std::size_t i = 0; i < t.atom.size(); ++i)
    map.add(prefix + ".atom" + std::to_string(i), t.atom[i]);
  for (std::size_t i = 0; i < t.bond.size(); ++i)
    map.add(prefix + ".bond" + std::to_string(i), t.bond[i]);
}

namespace {

EncoderBlockParams make_block(const EncoderConfig& cfg, bool last,
                              std::uint64_t key) {
  std::int64_t d = cfg.hidden;
  EncoderBlockParams b;
  b.mpnn_r = make_mpnn(d, nd::mix_keys(key, 1));
  b.mpnn_p = make_mpnn(d, nd::mix_keys(key, 2));
  b.ln_mpnn_r = make_layer_norm(d);
  b.ln_mpnn_p = make_layer_norm(d);
  if (cfg.no_fusion) {
    b.side_r = make_ffn(d, d, d, nd::mix_keys(key, 3));
    b.side_p = make_ffn(d, d, d, nd::mix_keys(key, 4));
  } else {
    b.fuse = make_ffn(2 * d, 2 * d, 2 * d, nd::mix_keys(key, 5));
    b.leaving = make_ffn(d, d, d, nd::mix_keys(key, 6));
  }
  b.ln_fuse_r = make_layer_norm(d);
  b.ln_fuse_p = make_layer_norm(d);
  if (cfg.with_adapter) {
    b.adapter_r = make_attn(d, cfg.heads, nd::mix_keys(key, 7));
    b.adapter_p = make_attn(d, cfg.heads, nd::mix_keys(key, 8));
  }
  if (!last) {
    // The final block's node update is the encoder output; refreshed edges
    // would have no reader, so the last block carries no edge FFNs.
    b.edge_r = make_ffn(2 * d, d, d, nd::mix_keys(key, 9));
    b.edge_p = make_ffn(2 * d, d, d, nd::mix_keys(key, 10));
  }
  return b;
}

void register_block(EncoderBlockParams& b, bool no_fusion, nd::ParamMap& map,
                    const std::string& prefix) {
  register_mpnn(b.mpnn_r, map, prefix + ".mpnn_r");
  register_mpnn(b.mpnn_p, map, prefix + ".mpnn_p");
  register_layer_norm(b.ln_mpnn_r, map, prefix + ".ln_mpnn_r");
  register_layer_norm(b.ln_mpnn_p, map, prefix + ".ln_mpnn_p");
  if (no_fusion) {
    register_ffn(b.side_r, map, prefix + ".side_r");
    register_ffn(b.side_p, map, prefix + ".side_p");
  } else {
    register_ffn(b.fuse, map, prefix + ".fuse");
    register_ffn(b.leaving, map, prefix + ".leaving");
  }
  register_layer_norm(b.ln_fuse_r, map, prefix + ".ln_fuse_r");
  register_layer_norm(b.ln_fuse_p, map, prefix + ".ln_fuse_p");
  if (b.adapter_r) register_attn(*b.adapter_r, map, prefix + ".adapter_r");
  if (b.adapter_p) register_attn(*b.adapter_p, map, prefix + ".adapter_p");
  if (b.edge_r.l1.w.defined()) {
    register_ffn(b.edge_r, map, prefix + ".edge_r");
    register_ffn(b.edge_p, map, prefix + ".edge_p");
  }
}

Tensor init_nodes(const BatchSide& side, const EmbeddingTables& tables) {
  std::vector<Tensor> list(tables.atom.begin(), tables.atom.end());
  return nd::embedding_lookup_sum(list, side.atom_codes, side.total_nodes);
}

Tensor init_edges(const BatchSide& side, const EmbeddingTables& tables) {
  if (side.total_edges == 0) return {};
  std::vector<Tensor> list(tables.bond.begin(), tables.bond.end());
  return nd::embedding_lookup_sum(list, side.edge_codes, side.total_edges);
}

Tensor maybe_dropout(const Tensor& x, nd::DropKeys& keys) {
  return nd::dropout(x, keys.rate, keys.train, keys.next());
}

// Condition attention per graph: rows of h within each slice attend into
// that graph's condition matrix.  Graphs without conditions pass through.
Tensor adapt_side(const Tensor& h, const std::vector<GraphSlice>& slices,
                  const std::vector<Tensor>& condition, const AttnParams& attn,
                  nd::DropKeys& keys) {
  std::vector<Tensor> pieces;
  pieces.reserve(slices.size());
  for (std::size_t g = 0; g < slices.size(); ++g) {
    const GraphSlice& s = slices[g];
    Tensor rows = nd::slice_rows(h, s.node_offset, s.nodes);
    if (g < condition.size() && condition[g].defined() &&
        condition[g].dim(0) > 0) {
      Tensor att =
          multihead_attention(rows, condition[g], condition[g], attn);
      rows = nd::add(rows, maybe_dropout(att, keys));
    }
    pieces.push_back(rows);
  }
  return pieces.size() == 1 ? pieces.front() : nd::concat_rows(pieces);
}

Tensor refresh_edges(const Tensor& h, const Tensor& e, const BatchSide& side,
                     const FfnParams& f) {
  if (!e.defined()) return e;
  Tensor endpoints = nd::concat_cols(
      {nd::gather_rows(h, side.edge_dst), nd::gather_rows(h, side.edge_src)});
  return nd::add(e, ffn(endpoints, f));
}

}  // namespace

EncoderParams make_encoder(const EncoderConfig& cfg, std::uint64_t key) {
  EncoderParams p;
  p.cfg = cfg;
  p.tables = make_embedding_tables(cfg.hidden, nd::mix_keys(key, 1));
  for (int i = 0; i < cfg.blocks; ++i)
    p.blocks.push_back(
        make_block(cfg, i + 1 == cfg.blocks, nd::mix_keys(key, 1000 + i)));
  return p;
}

void register_encoder(EncoderParams& p, nd::ParamMap& map,
                      const std::string& prefix) {
  register_embedding_tables(p.tables, map, prefix + ".tables");
  for (std::size_t i = 0; i < p.blocks.size(); ++i)
    register_block(p.blocks[i], p.cfg.no_fusion, map,
                   prefix + ".block" + std::to_string(i));
}

EncodeResult encode_batch(const ReactionBatch& batch, const EncoderParams& p,
                          const std::vector<nd::Tensor>* condition,
                          const EncodeOptions& opts) {
  static const std::vector<Tensor> kNoCondition;
  const std::vector<Tensor>& cond = condition ? *condition : kNoCondition;

  nd::DropKeys keys{opts.train, p.cfg.dropout, opts.seed, opts.step, 0};

  Tensor h_r = init_nodes(batch.reactant, p.tables);
  Tensor h_p = init_nodes(batch.product, p.tables);
  Tensor e_r = init_edges(batch.reactant, p.tables);
  Tensor e_p = init_edges(batch.product, p.tables);

  for (const EncoderBlockParams& block : p.blocks) {
    Tensor mp_r = mpnn_layer(h_r, e_r, batch.reactant.edge_dst,
                             batch.reactant.edge_src, block.mpnn_r);
    Tensor mp_p = mpnn_layer(h_p, e_p, batch.product.edge_dst,
                             batch.product.edge_src, block.mpnn_p);
    Tensor h1_r = add_norm(h_r, maybe_dropout(mp_r, keys), block.ln_mpnn_r);
    Tensor h1_p = add_norm(h_p, maybe_dropout(mp_p, keys), block.ln_mpnn_p);

    Tensor f_r, f_p;
    if (p.cfg.no_fusion) {
      f_r = ffn(h1_r, block.side_r);
      f_p = ffn(h1_p, block.side_p);
    } else {
      std::int64_t d = p.cfg.hidden;
      Tensor paired_r = nd::gather_rows(h1_r, batch.mapped_rows);
      Tensor fused = ffn(nd::concat_cols({paired_r, h1_p}), block.fuse);
      Tensor fused_r = nd::slice_cols(fused, 0, d);
      f_p = nd::slice_cols(fused, d, d);
      if (batch.leaving_rows.empty()) {
        f_r = fused_r;  // mapped rows are all rows, in order
      } else {
        Tensor left = ffn(nd::gather_rows(h1_r, batch.leaving_rows),
                          block.leaving);
        std::vector<std::int64_t> idx = batch.mapped_rows;
        idx.insert(idx.end(), batch.leaving_rows.begin(),
                   batch.leaving_rows.end());
        f_r = nd::scatter_rows(nd::concat_rows({fused_r, left}), idx,
                               batch.reactant.total_nodes);
      }
    }
    Tensor h2_r = add_norm(h1_r, maybe_dropout(f_r, keys), block.ln_fuse_r);
    Tensor h2_p = add_norm(h1_p, maybe_dropout(f_p, keys), block.ln_fuse_p);

    if (block.adapter_r && !cond.empty()) {
      h2_r = adapt_side(h2_r, batch.reactant.slices, cond, *block.adapter_r,
                        keys);
      h2_p = adapt_side(h2_p, batch.product.slices, cond, *block.adapter_p,
                        keys);
    }

    if (block.edge_r.l1.w.defined()) {
      e_r = refresh_edges(h2_r, e_r, batch.reactant, block.edge_r);
      e_p = refresh_edges(h2_p, e_p, batch.product, block.edge_p);
    }
    h_r = h2_r;
    h_p = h2_p;
    if (opts.capture_blocks) opts.capture_blocks->emplace_back(h_r, h_p);
  }
  return {h_r, h_p};
}

ConditionEncoderParams make_condition_encoder(std::int64_t dim, int layers,
                                              std::uint64_t key) {
  ConditionEncoderParams p;
  p.hidden = dim;
  for (int i = 0; i < kAtomDescriptorCount; ++i)
    p.atom_tables.push_back(nd::gaussian_init({kAtomTableSizes[i], dim}, 0.1,
                                              nd::mix_keys(key, 300 + i)));
  for (int l = 0; l < layers; ++l) {
    ConditionLayerParams layer;
    layer.mlp = make_ffn(dim, dim, dim, nd::mix_keys(key, 400 + l));
    for (int i = 0; i < kBondDescriptorCount; ++i)
      layer.bond_tables.push_back(
          nd::gaussian_init({kBondTableSizes[i], dim}, 0.1,
                            nd::mix_keys(key, 500 + l * 8 + i)));
    layer.self_vec =
        nd::gaussian_init({1, dim}, 0.1, nd::mix_keys(key, 600 + l));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void register_condition_encoder(ConditionEncoderParams& p, nd::ParamMap& map,
                                const std::string& prefix) {
  for (std::size_t i = 0; i < p.atom_tables.size(); ++i)
    map.add(prefix + ".atom" + std::to_string(i), p.atom_tables[i]);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    std::string lp = prefix + ".layer" + std::to_string(l);
    register_ffn(p.layers[l].mlp, map, lp + ".mlp");
    for (std::size_t i = 0; i < p.layers[l].bond_tables.size(); ++i)
      map.add(lp + ".bond" + std::to_string(i), p.layers[l].bond_tables[i]);
    map.add(lp + ".self", p.layers[l].self_vec);
  }
}

nd::Tensor encode_condition_mols(const std::vector<FeaturizedMol>& mols,
                                 const ConditionEncoderParams& p) {
  if (mols.empty()) return {};
  BatchSide side;
  for (std::size_t g = 0; g < mols.size(); ++g)
    side.append(mols[g], static_cast<std::int64_t>(g));

  Tensor h = nd::embedding_lookup_sum(p.atom_tables, side.atom_codes,
                                      side.total_nodes);
  for (const ConditionLayerParams& layer : p.layers) {
    Tensor neigh;
    if (side.total_edges > 0) {
      Tensor gathered = nd::gather_rows(h, side.edge_src);
      neigh = nd::segment_sum_rows(gathered, side.edge_dst, side.total_nodes);
      Tensor eb = nd::embedding_lookup_sum(layer.bond_tables, side.edge_codes,
                                           side.total_edges);
      Tensor esum =
          nd::segment_sum_rows(eb, side.edge_dst, side.total_nodes);
      neigh = nd::add(neigh, esum);
    }
    Tensor total = neigh.defined() ? nd::add(h, neigh) : h;
    total = nd::add(total, nd::tile_rows(layer.self_vec, side.total_nodes));
    h = nd::relu(ffn(total, layer.mlp));
  }
  // Mean pool per molecule.
  Tensor sums = nd::segment_sum_rows(h, side.node_graph,
                                     static_cast<std::int64_t>(mols.size()));
  std::vector<double> inv(mols.size());
  for (std::size_t g = 0; g < mols.size(); ++g)
    inv[g] = mols[g].n > 0 ? 1.0 / static_cast<double>(mols[g].n) : 0.0;
  Tensor inv_t =
      Tensor::leaf({static_cast<std::int64_t>(mols.size())}, std::move(inv));
  return nd::scale_rows(sums, inv_t);
}

}  // namespace rxnalign
