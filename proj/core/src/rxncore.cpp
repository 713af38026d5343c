#include "rxnalign/rxncore.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace rxnalign {

namespace {

MolGraph merge_fragments(const std::vector<MolGraph>& mols) {
  MolGraph merged;
  for (const MolGraph& mol : mols) {
    int offset = merged.num_atoms();
    merged.atoms.insert(merged.atoms.end(), mol.atoms.begin(), mol.atoms.end());
    merged.total_h.insert(merged.total_h.end(), mol.total_h.begin(),
                          mol.total_h.end());
    for (Bond b : mol.bonds) {
      b.a += offset;
      b.b += offset;
      merged.bonds.push_back(b);
    }
  }
  return merged;
}

MolGraph permute_atoms(const MolGraph& mol, const std::vector<int>& new_index) {
  MolGraph out;
  out.atoms.resize(mol.atoms.size());
  out.total_h.resize(mol.atoms.size());
  for (int i = 0; i < mol.num_atoms(); ++i) {
    out.atoms[new_index[i]] = mol.atoms[i];
    out.total_h[new_index[i]] = mol.total_h[i];
  }
  out.bonds = mol.bonds;
  for (Bond& b : out.bonds) {
    b.a = new_index[b.a];
    b.b = new_index[b.b];
  }
  return out;
}

std::unordered_map<int, int> map_index(const MolGraph& mol, const char* side) {
  std::unordered_map<int, int> out;
  for (int i = 0; i < mol.num_atoms(); ++i) {
    const Atom& a = mol.atoms[i];
    if (!a.map_num || *a.map_num == 0) continue;
    auto [it, inserted] = out.emplace(*a.map_num, i);
    (void)it;
    if (!inserted)
      throw AlignError("atom map " + std::to_string(*a.map_num) +
                       " appears twice on the " + side + " side");
  }
  return out;
}

}  // namespace

AlignedReaction align_atoms(const std::vector<MolGraph>& reactants,
                            const std::vector<MolGraph>& products) {
  AlignedReaction rxn;
  MolGraph reactant = merge_fragments(reactants);
  rxn.product = merge_fragments(products);

  std::unordered_map<int, int> rmap = map_index(reactant, "reactant");
  std::unordered_map<int, int> pmap = map_index(rxn.product, "product");

  for (int i = 0; i < rxn.product.num_atoms(); ++i) {
    const Atom& a = rxn.product.atoms[i];
    if (!a.map_num || *a.map_num == 0)
      throw AlignError("product atom without a map number");
  }

  rxn.pair_count = rxn.product.num_atoms();
  std::vector<int> new_index(reactant.num_atoms(), -1);
  for (int p = 0; p < rxn.product.num_atoms(); ++p) {
    int map = *rxn.product.atoms[p].map_num;
    auto it = rmap.find(map);
    if (it == rmap.end())
      throw AlignError("product atom map " + std::to_string(map) +
                       " missing from the reactants");
    const Atom& ra = reactant.atoms[it->second];
    if (ra.element != rxn.product.atoms[p].element)
      throw AlignError("atom map " + std::to_string(map) +
                       " pairs different elements");
    new_index[it->second] = p;
  }
  int tail = rxn.pair_count;
  for (int i = 0; i < reactant.num_atoms(); ++i)
    if (new_index[i] < 0) new_index[i] = tail++;

  rxn.reactant = permute_atoms(reactant, new_index);
  return rxn;
}

std::vector<int> detect_reaction_centers(const AlignedReaction& rxn) {
  int n = rxn.reactant.num_atoms();
  int m = rxn.pair_count;
  std::vector<char> rc(n, 0);

  auto key = [](int a, int b) {
    return std::make_pair(std::min(a, b), std::max(a, b));
  };
  std::map<std::pair<int, int>, BondOrder> product_bonds;
  for (const Bond& b : rxn.product.bonds) product_bonds[key(b.a, b.b)] = b.order;
  std::map<std::pair<int, int>, BondOrder> reactant_bonds;
  for (const Bond& b : rxn.reactant.bonds)
    reactant_bonds[key(b.a, b.b)] = b.order;

  std::vector<char> trigger(n, 0);
  // Bonds broken, formed or reordered mark both endpoints.
  for (const Bond& b : rxn.reactant.bonds) {
    auto it = product_bonds.find(key(b.a, b.b));
    bool kept = b.a < m && b.b < m && it != product_bonds.end() &&
                it->second == b.order;
    if (!kept) trigger[b.a] = trigger[b.b] = 1;
  }
  for (const Bond& b : rxn.product.bonds) {
    auto it = reactant_bonds.find(key(b.a, b.b));
    if (it == reactant_bonds.end() || it->second != b.order)
      trigger[b.a] = trigger[b.b] = 1;
  }
  // Hydrogen count changes on a mapped pair.
  for (int i = 0; i < m; ++i)
    if (rxn.reactant.total_h[i] != rxn.product.total_h[i]) trigger[i] = 1;

  for (int i = 0; i < n; ++i) rc[i] = trigger[i];

  // One-hop neighbors, within each side's own connectivity; a neighbor on
  // either side marks the shared index.
  Adjacency radj = build_adjacency(rxn.reactant);
  Adjacency padj = build_adjacency(rxn.product);
  for (int i = 0; i < n; ++i) {
    if (!trigger[i]) continue;
    for (auto [v, bi] : radj[i]) {
      (void)bi;
      rc[v] = 1;
    }
    if (i < m)
      for (auto [v, bi] : padj[i]) {
        (void)bi;
        rc[v] = 1;
      }
  }
  // The leaving tail is always part of the center.
  for (int i = m; i < n; ++i) rc[i] = 1;

  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (rc[i]) out.push_back(i);
  return out;
}

AlignedReaction make_aligned_reaction(const ReactionParts& parts) {
  AlignedReaction rxn = align_atoms(parts.reactants, parts.products);
  rxn.reaction_centers = detect_reaction_centers(rxn);
  rxn.condition_mols = parts.reagents;
  return rxn;
}

bool is_metal_element(int element) {
  static const std::set<int> nonmetal = {
      1,                           // H
      2, 10, 18, 36, 54, 86,       // noble gases
      5, 6, 7, 8, 9,               // B C N O F
      14, 15, 16, 17,              // Si P S Cl
      33, 34, 35,                  // As Se Br
      52, 53, 85,                  // Te I At
  };
  return element >= 1 && !nonmetal.count(element);
}

ReagentClass classify_reagent(const MolGraph& mol) {
  bool has_metal = false, has_halogen = false, has_carbon = false,
       has_phosphorus = false, all_metal = !mol.atoms.empty(),
       metal_or_halogen_only = !mol.atoms.empty();
  for (const Atom& a : mol.atoms) {
    bool metal = is_metal_element(a.element);
    bool halogen = a.element == 9 || a.element == 17 || a.element == 35 ||
                   a.element == 53 || a.element == 85;
    has_metal |= metal;
    has_halogen |= halogen;
    has_carbon |= a.element == 6;
    has_phosphorus |= a.element == 15;
    all_metal &= metal;
    metal_or_halogen_only &= metal || halogen;
  }
  bool has_ring = false;
  for (const Bond& b : mol.bonds) has_ring |= b.in_ring;

  if (all_metal) return ReagentClass::TypeI;
  if (metal_or_halogen_only && has_metal && has_halogen)
    return ReagentClass::TypeI;
  if (has_ring && (has_metal || has_phosphorus)) return ReagentClass::TypeI;
  if (has_carbon) return ReagentClass::TypeII;
  return ReagentClass::TypeIII;
}

std::vector<MolGraph> order_reagents(std::vector<MolGraph> mols) {
  struct Entry {
    int cls;
    std::string smiles;
    std::size_t idx;
  };
  std::vector<Entry> entries;
  entries.reserve(mols.size());
  for (std::size_t i = 0; i < mols.size(); ++i)
    entries.push_back({static_cast<int>(classify_reagent(mols[i])),
                       canonical_form(mols[i]), i});
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& x, const Entry& y) {
                     if (x.cls != y.cls) return x.cls < y.cls;
                     if (x.smiles.size() != y.smiles.size())
                       return x.smiles.size() < y.smiles.size();
                     return x.smiles < y.smiles;
                   });
  std::vector<MolGraph> out;
  out.reserve(mols.size());
  for (const Entry& e : entries) out.push_back(std::move(mols[e.idx]));
  return out;
}

std::string reaction_key(const AlignedReaction& rxn) {
  auto side_key = [](const MolGraph& merged) {
    std::vector<std::string> parts;
    for (const MolGraph& frag : split_fragments(merged))
      parts.push_back(canonical_form(frag));
    std::sort(parts.begin(), parts.end());
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += '.';
      out += parts[i];
    }
    return out;
  };
  return side_key(rxn.reactant) + ">>" + side_key(rxn.product);
}

double ratio_to_ddg(double ratio, double temperature_k) {
  if (!(ratio > 0))
    throw std::domain_error("selectivity ratio must be positive");
  if (!(temperature_k > 0))
    throw std::domain_error("temperature must be positive");
  return kGasConstantKcal * temperature_k * std::log(ratio);
}

double ddg_to_ratio(double ddg, double temperature_k) {
  if (!(temperature_k > 0))
    throw std::domain_error("temperature must be positive");
  return std::exp(ddg / (kGasConstantKcal * temperature_k));
}

}  // namespace rxnalign
