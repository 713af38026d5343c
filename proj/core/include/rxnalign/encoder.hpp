#pragma once

// The aligned dual-graph encoder.  Each block runs one attention-gated
// message passing layer per side, fuses mapped atom pairs through a shared
// feed-forward (leaving atoms get their own), optionally attends into
// condition embeddings, and refreshes edge features from their endpoints.

#include <cstdint>
#include <optional>
#include <vector>

#include "rxnalign/attention.hpp"
#include "rxnalign/features.hpp"
#include "rxnalign/rng.hpp"

namespace rxnalign {

struct MpnnParams {
  LinearParams node, edge;  // width-preserving projections
  nd::Tensor attn;          // (3 * dim, 1) scoring vector
  nd::Tensor self_edge;     // (1, dim) learned self-loop edge feature
};

MpnnParams make_mpnn(std::int64_t dim, std::uint64_t key);
void register_mpnn(MpnnParams& p, nd::ParamMap& map, const std::string& prefix);

// One round of attention-weighted neighborhood aggregation with self loops:
// out_u = proj(h_u) + sum_v alpha_uv proj_e(e_uv).
nd::Tensor mpnn_layer(const nd::Tensor& h, const nd::Tensor& e,
                      const std::vector<std::int64_t>& edge_dst,
                      const std::vector<std::int64_t>& edge_src,
                      const MpnnParams& p);

struct EncoderConfig {
  std::int64_t hidden = 128;
  int blocks = 3;
  int heads = 8;
  double dropout = 0.0;
  bool no_fusion = false;     // ablation: per-side FFNs, no pair mixing
  bool with_adapter = false;  // condition attention in every block
};

struct EncoderBlockParams {
  MpnnParams mpnn_r, mpnn_p;
  LayerNormParams ln_mpnn_r, ln_mpnn_p;
  FfnParams fuse;     // (2d -> 2d), mapped pairs
  FfnParams leaving;  // (d -> d), reactant-only atoms
  FfnParams side_r, side_p;  // used instead of fuse/leaving when no_fusion
  LayerNormParams ln_fuse_r, ln_fuse_p;
  std::optional<AttnParams> adapter_r, adapter_p;
  FfnParams edge_r, edge_p;  // (2d -> d) edge refresh; absent in the last block
};

struct EmbeddingTables {
  std::vector<nd::Tensor> atom, bond;
};

EmbeddingTables make_embedding_tables(std::int64_t dim, std::uint64_t key);
void register_embedding_tables(EmbeddingTables& t, nd::ParamMap& map,
                               const std::string& prefix);

struct EncoderParams {
  EncoderConfig cfg;
  EmbeddingTables tables;
  std::vector<EncoderBlockParams> blocks;
};

EncoderParams make_encoder(const EncoderConfig& cfg, std::uint64_t key);
void register_encoder(EncoderParams& p, nd::ParamMap& map,
                      const std::string& prefix);

struct EncodeOptions {
  bool train = false;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  // When set, receives (reactant, product) features after every block.
  std::vector<std::pair<nd::Tensor, nd::Tensor>>* capture_blocks = nullptr;
};

struct EncodeResult {
  nd::Tensor reactant;  // (total reactant atoms, d)
  nd::Tensor product;   // (total product atoms, d)
};

// condition: one (mols, d) tensor per batch item, or nullptr / undefined
// entries for reactions without condition input.
EncodeResult encode_batch(const ReactionBatch& batch, const EncoderParams& p,
                          const std::vector<nd::Tensor>* condition,
                          const EncodeOptions& opts = {});

// Rollout encoder for condition molecules; returns one pooled row per
// molecule, stacked into (mols, d).
struct ConditionLayerParams {
  FfnParams mlp;
  std::vector<nd::Tensor> bond_tables;
  nd::Tensor self_vec;  // (1, dim)
};

struct ConditionEncoderParams {
  std::int64_t hidden = 128;
  std::vector<nd::Tensor> atom_tables;
  std::vector<ConditionLayerParams> layers;
};

ConditionEncoderParams make_condition_encoder(std::int64_t dim, int layers,
                                              std::uint64_t key);
void register_condition_encoder(ConditionEncoderParams& p, nd::ParamMap& map,
                                const std::string& prefix);
nd::Tensor encode_condition_mols(const std::vector<FeaturizedMol>& mols,
                                 const ConditionEncoderParams& p);

}  // namespace rxnalign
