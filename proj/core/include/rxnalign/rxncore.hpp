#pragma once

// Atom-aligned reactions: index alignment driven by atom maps, detection of
// the reaction center, reagent role rules and the selectivity transforms.

#include <stdexcept>
#include <string>
#include <vector>

#include "rxnalign/molgraph.hpp"

namespace rxnalign {

class AlignError : public std::runtime_error {
 public:
  explicit AlignError(std::string message)
      : std::runtime_error(std::move(message)) {}
};

// Reactant and product merged into one index space.  Atoms 0..pair_count-1 of
// the reactant correspond one-to-one with the product atoms at the same
// index; the tail holds leaving atoms that do not survive into the product.
struct AlignedReaction {
  MolGraph reactant;
  MolGraph product;
  int pair_count = 0;
  std::vector<int> reaction_centers;  // sorted reactant-space indices
  std::vector<MolGraph> condition_mols;

  int leaving_count() const { return reactant.num_atoms() - pair_count; }
  std::vector<int> leaving_atoms() const {
    std::vector<int> out;
    for (int i = pair_count; i < reactant.num_atoms(); ++i) out.push_back(i);
    return out;
  }
};

// Merges the fragment lists and reorders reactant atoms so mapped pairs share
// indices.  Every product atom must carry a map number that occurs exactly
// once on each side; reactant atoms without a matching product atom become
// the leaving tail, keeping their original relative order.
AlignedReaction align_atoms(const std::vector<MolGraph>& reactants,
                            const std::vector<MolGraph>& products);

// Atoms participating in the transformation: endpoints of bonds that change
// or break, atoms whose hydrogen count changes, one-hop neighbors of those
// (mirrored across mapped pairs) and all leaving atoms.
std::vector<int> detect_reaction_centers(const AlignedReaction& rxn);

// align_atoms + detect_reaction_centers + parsed condition molecules.
AlignedReaction make_aligned_reaction(const ReactionParts& parts);

// Map-blind canonical reactant>>product text; duplicate reactions written in
// different notations collapse to the same key, so references can be grouped.
std::string reaction_key(const AlignedReaction& rxn);

enum class ReagentClass { TypeI = 0, TypeII = 1, TypeIII = 2 };

// TypeI: free metals, metal halides, ring-bearing species that also carry a
// metal or phosphorus (catalysts and ligands).  TypeII: other carbon-bearing
// molecules.  TypeIII: everything else.
ReagentClass classify_reagent(const MolGraph& mol);

bool is_metal_element(int element);

// Sorts by (class, canonical SMILES length, canonical SMILES).
std::vector<MolGraph> order_reagents(std::vector<MolGraph> mols);

inline constexpr double kGasConstantKcal = 1.987204e-3;  // kcal / (mol K)
inline constexpr double kRoomTempK = 298.15;

// Free energy difference of two competing pathways from their product ratio,
// in kcal/mol, and back.
double ratio_to_ddg(double ratio, double temperature_k = kRoomTempK);
double ddg_to_ratio(double ddg, double temperature_k = kRoomTempK);

}  // namespace rxnalign
