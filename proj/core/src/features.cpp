#include "rxnalign/features.hpp"

#include <algorithm>

namespace rxnalign {

std::array<int, kAtomDescriptorCount> atom_descriptor_codes(
    const MolGraph& mol, int atom, const std::vector<int>& degrees) {
  const Atom& a = mol.atoms[atom];
  int charge = std::clamp(a.formal_charge, -4, 4);
  int degree = std::min(degrees[atom], 10);
  int h = std::clamp(mol.total_h[atom], 0, 8);
  bool in_ring = false;
  for (const Bond& b : mol.bonds)
    if ((b.a == atom || b.b == atom) && b.in_ring) in_ring = true;
  int sign = a.formal_charge < 0 ? 0 : a.formal_charge == 0 ? 1 : 2;
  return {a.element,          charge + 4, degree, h, a.aromatic ? 1 : 0,
          in_ring ? 1 : 0,    a.isotope ? 1 : 0, sign, 0};
}

std::array<int, kBondDescriptorCount> bond_descriptor_codes(const Bond& bond) {
  return {static_cast<int>(bond.order), static_cast<int>(bond.stereo),
          bond.conjugated ? 1 : 0};
}

FeaturizedMol featurize_mol(const MolGraph& mol) {
  FeaturizedMol out;
  out.n = mol.num_atoms();
  std::vector<int> degrees = atom_degrees(mol);
  out.atom_codes.reserve(out.n * kAtomDescriptorCount);
  for (int i = 0; i < out.n; ++i) {
    auto codes = atom_descriptor_codes(mol, i, degrees);
    out.atom_codes.insert(out.atom_codes.end(), codes.begin(), codes.end());
  }
  out.edge_dst.reserve(2 * mol.num_bonds());
  out.edge_src.reserve(2 * mol.num_bonds());
  out.edge_codes.reserve(2 * mol.num_bonds() * kBondDescriptorCount);
  for (const Bond& b : mol.bonds) {
    auto codes = bond_descriptor_codes(b);
    out.edge_dst.push_back(b.a);
    out.edge_src.push_back(b.b);
    out.edge_codes.insert(out.edge_codes.end(), codes.begin(), codes.end());
    out.edge_dst.push_back(b.b);
    out.edge_src.push_back(b.a);
    out.edge_codes.insert(out.edge_codes.end(), codes.begin(), codes.end());
  }
  return out;
}

FeaturizedReaction featurize_reaction(const AlignedReaction& rxn) {
  FeaturizedReaction out;
  out.n = rxn.reactant.num_atoms();
  out.m = rxn.pair_count;
  out.reactant = featurize_mol(rxn.reactant);
  out.product = featurize_mol(rxn.product);
  out.rc_reactant.assign(out.n, 0);
  out.rc_product.assign(out.m, 0);
  for (int idx : rxn.reaction_centers) {
    out.rc_reactant[idx] = 1;
    if (idx < out.m) out.rc_product[idx] = 1;
  }
  out.condition_mols.reserve(rxn.condition_mols.size());
  for (const MolGraph& mol : rxn.condition_mols)
    out.condition_mols.push_back(featurize_mol(mol));
  return out;
}

void BatchSide::append(const FeaturizedMol& mol, std::int64_t graph_id) {
  GraphSlice slice;
  slice.node_offset = total_nodes;
  slice.nodes = mol.n;
  slice.edge_offset = total_edges;
  slice.edges = mol.num_edges();
  atom_codes.insert(atom_codes.end(), mol.atom_codes.begin(),
                    mol.atom_codes.end());
  for (std::size_t e = 0; e < mol.edge_dst.size(); ++e) {
    edge_dst.push_back(mol.edge_dst[e] + slice.node_offset);
    edge_src.push_back(mol.edge_src[e] + slice.node_offset);
  }
  edge_codes.insert(edge_codes.end(), mol.edge_codes.begin(),
                    mol.edge_codes.end());
  for (int i = 0; i < mol.n; ++i) node_graph.push_back(graph_id);
  total_nodes += mol.n;
  total_edges += mol.num_edges();
  slices.push_back(slice);
}

ReactionBatch make_batch(const std::vector<const FeaturizedReaction*>& items) {
  ReactionBatch batch;
  batch.items = items;
  for (std::size_t g = 0; g < items.size(); ++g) {
    const FeaturizedReaction& rxn = *items[g];
    std::int64_t r_off = batch.reactant.total_nodes;
    batch.reactant.append(rxn.reactant, static_cast<std::int64_t>(g));
    batch.product.append(rxn.product, static_cast<std::int64_t>(g));
    for (int i = 0; i < rxn.m; ++i) batch.mapped_rows.push_back(r_off + i);
    for (int i = rxn.m; i < rxn.n; ++i) batch.leaving_rows.push_back(r_off + i);
    batch.rc_reactant.insert(batch.rc_reactant.end(), rxn.rc_reactant.begin(),
                             rxn.rc_reactant.end());
    batch.rc_product.insert(batch.rc_product.end(), rxn.rc_product.begin(),
                            rxn.rc_product.end());
  }
  return batch;
}

}  // namespace rxnalign
