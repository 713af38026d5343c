#pragma once

// Descriptor coding of molecular graphs and reaction batching.  Descriptors
// are small categorical codes; each one owns an embedding table and a node's
// input vector is the sum of its descriptor embeddings.

#include <array>
#include <cstdint>
#include <vector>

#include "rxnalign/rxncore.hpp"

namespace rxnalign {

inline constexpr int kAtomDescriptorCount = 9;
// element, charge (clipped -4..4), degree, total H, aromatic, in ring,
// isotope flag, charge sign, radical slot (reserved, always 0).
inline constexpr std::array<int, kAtomDescriptorCount> kAtomTableSizes{
    119, 9, 11, 9, 2, 2, 2, 3, 1};

inline constexpr int kBondDescriptorCount = 3;
// order, stereo, conjugated.
inline constexpr std::array<int, kBondDescriptorCount> kBondTableSizes{4, 3, 2};

std::array<int, kAtomDescriptorCount> atom_descriptor_codes(
    const MolGraph& mol, int atom, const std::vector<int>& degrees);
std::array<int, kBondDescriptorCount> bond_descriptor_codes(const Bond& bond);

// A graph ready for the message passing layers: atom codes plus a directed
// edge list with two entries per bond (dst first, src second).
struct FeaturizedMol {
  int n = 0;
  std::vector<int> atom_codes;             // n * kAtomDescriptorCount
  std::vector<std::int64_t> edge_dst, edge_src;
  std::vector<int> edge_codes;             // edges * kBondDescriptorCount

  int num_edges() const { return static_cast<int>(edge_dst.size()); }
};

FeaturizedMol featurize_mol(const MolGraph& mol);

struct FeaturizedReaction {
  int n = 0;  // reactant atoms
  int m = 0;  // product atoms == mapped pairs
  FeaturizedMol reactant, product;
  std::vector<std::uint8_t> rc_reactant;   // size n
  std::vector<std::uint8_t> rc_product;    // size m
  std::vector<FeaturizedMol> condition_mols;

  // Supervision; filled by the dataset layer.
  std::vector<int> target_tokens;
  double target_value = 0;
};

FeaturizedReaction featurize_reaction(const AlignedReaction& rxn);

struct GraphSlice {
  std::int64_t node_offset = 0, nodes = 0;
  std::int64_t edge_offset = 0, edges = 0;
};

// Disjoint union of one side over the batch.
struct BatchSide {
  std::vector<int> atom_codes;
  std::vector<std::int64_t> edge_dst, edge_src;  // global node ids
  std::vector<int> edge_codes;
  std::vector<std::int64_t> node_graph;          // graph id per node
  std::vector<GraphSlice> slices;
  std::int64_t total_nodes = 0, total_edges = 0;

  void append(const FeaturizedMol& mol, std::int64_t graph_id);
};

struct ReactionBatch {
  BatchSide reactant, product;
  // Global reactant rows of mapped atoms, ordered so position i corresponds
  // to global product row i.
  std::vector<std::int64_t> mapped_rows;
  std::vector<std::int64_t> leaving_rows;
  std::vector<std::uint8_t> rc_reactant, rc_product;
  std::vector<const FeaturizedReaction*> items;

  std::int64_t size() const { return static_cast<std::int64_t>(items.size()); }
};

ReactionBatch make_batch(const std::vector<const FeaturizedReaction*>& items);

}  // namespace rxnalign
