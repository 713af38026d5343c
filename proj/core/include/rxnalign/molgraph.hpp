#pragma once

// Molecular graphs parsed from SMILES text, canonical serialization and the
// token scanner used by the sequence models.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rxnalign {

enum class BondOrder : std::uint8_t { Single, Double, Triple, Aromatic };
enum class BondStereo : std::uint8_t { None, Up, Down };
enum class Chirality : std::uint8_t { None, Clockwise, Counterclockwise };

struct Atom {
  int element = 0;  // atomic number
  int formal_charge = 0;
  bool aromatic = false;
  std::optional<int> explicit_h;  // set iff the atom was written in brackets
  std::optional<int> isotope;
  std::optional<int> map_num;
  Chirality chirality = Chirality::None;
};

struct Bond {
  int a = -1;
  int b = -1;
  BondOrder order = BondOrder::Single;
  BondStereo stereo = BondStereo::None;
  bool in_ring = false;     // derived; see ring_and_conjugation_flags
  bool conjugated = false;  // derived
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::size_t position)
      : std::runtime_error(std::move(message)), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<int> total_h;  // explicit plus implicit hydrogens, per atom

  int num_atoms() const { return static_cast<int>(atoms.size()); }
  int num_bonds() const { return static_cast<int>(bonds.size()); }
  bool empty() const { return atoms.empty(); }
};

// Neighbor lists as (atom index, bond index) pairs.
using Adjacency = std::vector<std::vector<std::pair<int, int>>>;
Adjacency build_adjacency(const MolGraph& mol);

std::vector<int> atom_degrees(const MolGraph& mol);
std::vector<char> atoms_in_ring(const MolGraph& mol);

// Connected components in atom order; component ids are dense from zero.
std::vector<int> connected_components(const MolGraph& mol);

// Splits a multi-fragment graph into one graph per component, preserving
// atom order within each fragment.
std::vector<MolGraph> split_fragments(const MolGraph& mol);

struct ReactionParts {
  std::vector<MolGraph> reactants;
  std::vector<MolGraph> reagents;
  std::vector<MolGraph> products;
};

// Parses a single SMILES string (dot-separated fragments allowed).  The
// returned graph has ring/conjugation flags and hydrogen counts resolved.
MolGraph parse_smiles(std::string_view text);

// Parses "reactants>reagents>products".  The middle segment may be empty.
ReactionParts parse_reaction(std::string_view text);

// Marks ring bonds (any bond on a cycle) and conjugated bonds (single bonds
// between sp2-ish atoms, i.e. atoms that are aromatic or carry a double or
// triple bond; aromatic and double bonds flanked by them are marked too).
void ring_and_conjugation_flags(MolGraph& mol);

// Fills total_h from explicit counts or the fixed valence table and derives
// the bond flags.  parse_smiles applies this; call it for graphs built in
// code before featurizing them.
void finalize_graph(MolGraph& mol);

struct WriteOptions {
  bool with_maps = false;
};

// Canonical SMILES via iterative neighborhood refinement with deterministic
// tie breaking.  Output is invariant to the input atom order.
std::string canonical_form(const MolGraph& mol, const WriteOptions& opts = {});

// Canonical ranks (a permutation of 0..n-1) for a single-fragment graph.
std::vector<int> canonical_ranks(const MolGraph& mol);

// Splits SMILES or reaction SMILES into model tokens: bracket atoms stay
// single tokens, Cl/Br are two-character tokens, %NN ring closures survive.
// Throws ParseError on characters outside the token alphabet.
std::vector<std::string> tokenize_smiles(std::string_view text);

// Fixed fallback valences used when inferring implicit hydrogens.  Returns
// an empty span for elements that never get implicit hydrogens.
const std::vector<int>& default_valences(int element);

int element_number(std::string_view symbol);  // 0 when unknown
const char* element_symbol(int element);      // "?" when out of range

}  // namespace rxnalign
