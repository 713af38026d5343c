#include "rxnalign/molgraph.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

namespace rxnalign {

namespace {

constexpr const char* kSymbols[] = {
    "?",  "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na",
    "Mg", "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",
    "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br",
    "Kr", "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag",
    "Cd", "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr",
    "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu",
    "Hf", "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi",
    "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am",
    "Cm", "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh",
    "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};
constexpr int kMaxElement = 118;

enum Elem {
  kH = 1, kB = 5, kC = 6, kN = 7, kO = 8, kF = 9, kP = 15, kS = 16,
  kCl = 17, kAs = 33, kSe = 34, kBr = 35, kTe = 52, kI = 53,
};

bool organic_subset(int z) {
  switch (z) {
    case kB: case kC: case kN: case kO: case kP: case kS:
    case kF: case kCl: case kBr: case kI:
      return true;
    default:
      return false;
  }
}

bool aromatic_capable(int z) {
  switch (z) {
    case kB: case kC: case kN: case kO: case kP: case kS:
    case kAs: case kSe: case kTe:
      return true;
    default:
      return false;
  }
}

double order_value(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1.0;
    case BondOrder::Double: return 2.0;
    case BondOrder::Triple: return 3.0;
    case BondOrder::Aromatic: return 1.5;
  }
  return 1.0;
}

int order_code(BondOrder o) { return static_cast<int>(o); }

const std::unordered_map<std::string, int>& symbol_index() {
  static const std::unordered_map<std::string, int> idx = [] {
    std::unordered_map<std::string, int> m;
    for (int z = 1; z <= kMaxElement; ++z) m.emplace(kSymbols[z], z);
    return m;
  }();
  return idx;
}

int floored_bond_sum(const MolGraph& mol, const Adjacency& adj, int atom) {
  double sum = 0;
  for (auto [nb, bi] : adj[atom]) {
    (void)nb;
    sum += order_value(mol.bonds[bi].order);
  }
  return static_cast<int>(std::floor(sum + 1e-9));
}

}  // namespace

const std::vector<int>& default_valences(int element) {
  static const std::vector<int> none;
  static const std::vector<int> v_b{3};
  static const std::vector<int> v_c{4};
  static const std::vector<int> v_n{3};
  static const std::vector<int> v_o{2};
  static const std::vector<int> v_p{3, 5};
  static const std::vector<int> v_s{2, 4, 6};
  static const std::vector<int> v_hal{1};
  switch (element) {
    case kB: return v_b;
    case kC: return v_c;
    case kN: return v_n;
    case kO: return v_o;
    case kP: return v_p;
    case kS: return v_s;
    case kF: case kCl: case kBr: case kI: return v_hal;
    default: return none;
  }
}

int element_number(std::string_view symbol) {
  auto& idx = symbol_index();
  auto it = idx.find(std::string(symbol));
  return it == idx.end() ? 0 : it->second;
}

const char* element_symbol(int element) {
  if (element < 1 || element > kMaxElement) return "?";
  return kSymbols[element];
}

Adjacency build_adjacency(const MolGraph& mol) {
  Adjacency adj(mol.atoms.size());
  for (int bi = 0; bi < mol.num_bonds(); ++bi) {
    const Bond& b = mol.bonds[bi];
    adj[b.a].emplace_back(b.b, bi);
    adj[b.b].emplace_back(b.a, bi);
  }
  return adj;
}

std::vector<int> atom_degrees(const MolGraph& mol) {
  std::vector<int> deg(mol.atoms.size(), 0);
  for (const Bond& b : mol.bonds) {
    ++deg[b.a];
    ++deg[b.b];
  }
  return deg;
}

std::vector<char> atoms_in_ring(const MolGraph& mol) {
  std::vector<char> in(mol.atoms.size(), 0);
  for (const Bond& b : mol.bonds)
    if (b.in_ring) in[b.a] = in[b.b] = 1;
  return in;
}

std::vector<int> connected_components(const MolGraph& mol) {
  std::vector<int> comp(mol.atoms.size(), -1);
  Adjacency adj = build_adjacency(mol);
  int next = 0;
  std::vector<int> stack;
  for (int s = 0; s < mol.num_atoms(); ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (auto [v, bi] : adj[u]) {
        (void)bi;
        if (comp[v] < 0) {
          comp[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return comp;
}

std::vector<MolGraph> split_fragments(const MolGraph& mol) {
  std::vector<int> comp = connected_components(mol);
  int count = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
  std::vector<MolGraph> out(count);
  std::vector<int> local(mol.atoms.size(), -1);
  for (int i = 0; i < mol.num_atoms(); ++i) {
    MolGraph& frag = out[comp[i]];
    local[i] = frag.num_atoms();
    frag.atoms.push_back(mol.atoms[i]);
    if (!mol.total_h.empty()) frag.total_h.push_back(mol.total_h[i]);
  }
  for (const Bond& b : mol.bonds) {
    Bond nb = b;
    nb.a = local[b.a];
    nb.b = local[b.b];
    out[comp[b.a]].bonds.push_back(nb);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct PendingBond {
  bool present = false;
  std::optional<BondOrder> order;
  BondStereo stereo = BondStereo::None;
  std::size_t pos = 0;
};

struct RingSlot {
  int atom = -1;
  std::optional<BondOrder> order;
  BondStereo stereo = BondStereo::None;
  std::size_t pos = 0;
};

class SmilesParser {
 public:
  SmilesParser(std::string_view text, std::size_t base)
      : text_(text), base_(base) {}

  MolGraph run() {
    while (pos_ < text_.size()) step();
    if (!branch_stack_.empty())
      fail("unclosed branch", branch_stack_.back().second);
    if (pending_.present) fail("dangling bond", pending_.pos);
    if (!ring_slots_.empty())
      fail("unmatched ring closure " + std::to_string(ring_slots_.begin()->first),
           ring_slots_.begin()->second.pos);
    finish();
    return std::move(mol_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw ParseError(msg, base_ + at);
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void step() {
    char c = text_[pos_];
    switch (c) {
      case '(': {
        if (prev_ < 0) fail("branch before any atom", pos_);
        if (pending_.present) fail("bond before branch open", pending_.pos);
        branch_stack_.emplace_back(prev_, pos_);
        ++pos_;
        return;
      }
      case ')': {
        if (branch_stack_.empty()) fail("unmatched ')'", pos_);
        if (pending_.present) fail("dangling bond", pending_.pos);
        prev_ = branch_stack_.back().first;
        branch_stack_.pop_back();
        ++pos_;
        return;
      }
      case '.': {
        if (!branch_stack_.empty()) fail("fragment dot inside branch", pos_);
        if (pending_.present) fail("bond before fragment dot", pending_.pos);
        prev_ = -1;
        ++pos_;
        return;
      }
      case '-': set_bond(BondOrder::Single, BondStereo::None); return;
      case '=': set_bond(BondOrder::Double, BondStereo::None); return;
      case '#': set_bond(BondOrder::Triple, BondStereo::None); return;
      case ':': set_bond(BondOrder::Aromatic, BondStereo::None); return;
      case '/': set_bond(BondOrder::Single, BondStereo::Up); return;
      case '\\': set_bond(BondOrder::Single, BondStereo::Down); return;
      case '%': {
        if (pos_ + 2 >= text_.size() || !std::isdigit(text_[pos_ + 1]) ||
            !std::isdigit(text_[pos_ + 2]))
          fail("'%' needs two digits", pos_);
        int num = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
        ring_closure(num, pos_);
        pos_ += 3;
        return;
      }
      case '[': {
        add_atom(parse_bracket(), pos_);
        return;
      }
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_closure(c - '0', pos_);
      ++pos_;
      return;
    }
    std::size_t at = pos_;
    Atom atom;
    if (!parse_organic(atom)) fail("unexpected character", at);
    add_atom(atom, at);
  }

  void set_bond(BondOrder order, BondStereo stereo) {
    if (pending_.present) fail("two bond symbols in a row", pos_);
    if (prev_ < 0) fail("bond with no preceding atom", pos_);
    pending_ = {true, order, stereo, pos_};
    ++pos_;
  }

  bool parse_organic(Atom& atom) {
    char c = text_[pos_];
    char next = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    auto take = [&](int z, bool aromatic, int len) {
      atom.element = z;
      atom.aromatic = aromatic;
      pos_ += len;
      return true;
    };
    switch (c) {
      case 'C': return next == 'l' ? take(kCl, false, 2) : take(kC, false, 1);
      case 'B': return next == 'r' ? take(kBr, false, 2) : take(kB, false, 1);
      case 'N': return take(kN, false, 1);
      case 'O': return take(kO, false, 1);
      case 'P': return take(kP, false, 1);
      case 'S': return take(kS, false, 1);
      case 'F': return take(kF, false, 1);
      case 'I': return take(kI, false, 1);
      case 'b': return take(kB, true, 1);
      case 'c': return take(kC, true, 1);
      case 'n': return take(kN, true, 1);
      case 'o': return take(kO, true, 1);
      case 'p': return take(kP, true, 1);
      case 's': return take(kS, true, 1);
      default: return false;
    }
  }

  Atom parse_bracket() {
    std::size_t open = pos_;
    ++pos_;  // '['
    Atom atom;
    atom.explicit_h = 0;
    if (std::isdigit(static_cast<unsigned char>(peek()))) {
      int iso = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        iso = iso * 10 + (text_[pos_] - '0');
        ++pos_;
      }
      atom.isotope = iso;
    }
    // Element symbol: two-letter lowercase aromatics first, then the longest
    // matching standard symbol, then one-letter lowercase aromatics.
    if (pos_ + 1 < text_.size()) {
      std::string two = std::string(text_.substr(pos_, 2));
      if (two == "se" || two == "as" || two == "te") {
        atom.element = element_number(two == "se" ? "Se" : two == "as" ? "As" : "Te");
        atom.aromatic = true;
        pos_ += 2;
      }
    }
    if (atom.element == 0 && std::isupper(static_cast<unsigned char>(peek()))) {
      if (pos_ + 1 < text_.size() &&
          std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
        int z = element_number(text_.substr(pos_, 2));
        if (z) {
          atom.element = z;
          pos_ += 2;
        }
      }
      if (atom.element == 0) {
        int z = element_number(text_.substr(pos_, 1));
        if (z) {
          atom.element = z;
          ++pos_;
        }
      }
    }
    if (atom.element == 0) {
      char c = peek();
      if (c == 'b' || c == 'c' || c == 'n' || c == 'o' || c == 'p' || c == 's') {
        Atom tmp;
        parse_organic(tmp);
        atom.element = tmp.element;
        atom.aromatic = true;
      } else {
        fail("unknown element in brackets", pos_);
      }
    }
    if (peek() == '@') {
      ++pos_;
      if (peek() == '@') {
        atom.chirality = Chirality::Clockwise;
        ++pos_;
      } else {
        atom.chirality = Chirality::Counterclockwise;
      }
    }
    if (peek() == 'H') {
      ++pos_;
      int h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        h = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
          h = h * 10 + (text_[pos_] - '0');
          ++pos_;
        }
      }
      atom.explicit_h = h;
    }
    if (peek() == '+' || peek() == '-') {
      int sign = peek() == '+' ? 1 : -1;
      char symbol = peek();
      ++pos_;
      int mag = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        mag = 0;
        while (std::isdigit(static_cast<unsigned char>(peek()))) {
          mag = mag * 10 + (text_[pos_] - '0');
          ++pos_;
        }
      } else {
        while (peek() == symbol) {
          ++mag;
          ++pos_;
        }
      }
      atom.formal_charge = sign * mag;
    }
    if (peek() == ':') {
      ++pos_;
      if (!std::isdigit(static_cast<unsigned char>(peek())))
        fail("atom map needs digits", pos_);
      int map = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        map = map * 10 + (text_[pos_] - '0');
        ++pos_;
      }
      atom.map_num = map;
    }
    if (peek() != ']') fail("expected ']'", open);
    ++pos_;
    return atom;
  }

  void add_atom(const Atom& atom, std::size_t at) {
    int idx = mol_.num_atoms();
    mol_.atoms.push_back(atom);
    atom_pos_.push_back(at);
    if (prev_ >= 0) {
      BondOrder order = pending_.order.value_or(
          (mol_.atoms[prev_].aromatic && atom.aromatic) ? BondOrder::Aromatic
                                                        : BondOrder::Single);
      make_bond(prev_, idx, order, pending_.stereo, at);
    }
    pending_ = {};
    prev_ = idx;
  }

  void ring_closure(int num, std::size_t at) {
    if (prev_ < 0) fail("ring closure before any atom", at);
    auto it = ring_slots_.find(num);
    if (it == ring_slots_.end()) {
      RingSlot slot;
      slot.atom = prev_;
      slot.order = pending_.order;
      slot.stereo = pending_.stereo;
      slot.pos = at;
      ring_slots_.emplace(num, slot);
      pending_ = {};
      return;
    }
    RingSlot slot = it->second;
    ring_slots_.erase(it);
    if (slot.atom == prev_) fail("ring closure to the same atom", at);
    if (slot.order && pending_.order && *slot.order != *pending_.order)
      fail("conflicting ring bond orders", at);
    std::optional<BondOrder> order = slot.order ? slot.order : pending_.order;
    BondOrder resolved = order.value_or(
        (mol_.atoms[slot.atom].aromatic && mol_.atoms[prev_].aromatic)
            ? BondOrder::Aromatic
            : BondOrder::Single);
    BondStereo stereo =
        slot.stereo != BondStereo::None ? slot.stereo : pending_.stereo;
    make_bond(slot.atom, prev_, resolved, stereo, at);
    pending_ = {};
  }

  void make_bond(int a, int b, BondOrder order, BondStereo stereo,
                 std::size_t at) {
    for (const Bond& bond : mol_.bonds)
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
        fail("duplicate bond between atoms", at);
    Bond bond;
    bond.a = a;
    bond.b = b;
    bond.order = order;
    bond.stereo = stereo;
    mol_.bonds.push_back(bond);
  }

  void finish() {
    ring_and_conjugation_flags(mol_);
    std::vector<char> in_ring = atoms_in_ring(mol_);
    for (int i = 0; i < mol_.num_atoms(); ++i)
      if (mol_.atoms[i].aromatic && !in_ring[i])
        fail("aromatic atom outside a ring", atom_pos_[i]);
    Adjacency adj = build_adjacency(mol_);
    mol_.total_h.resize(mol_.atoms.size(), 0);
    for (int i = 0; i < mol_.num_atoms(); ++i) {
      const Atom& atom = mol_.atoms[i];
      if (atom.explicit_h) {
        mol_.total_h[i] = *atom.explicit_h;
        continue;
      }
      const std::vector<int>& vals = default_valences(atom.element);
      int sum = floored_bond_sum(mol_, adj, i);
      int chosen = -1;
      for (int v : vals)
        if (v >= sum) {
          chosen = v;
          break;
        }
      if (chosen < 0)
        fail("valence of " + std::string(element_symbol(atom.element)) +
                 " exceeded",
             atom_pos_[i]);
      mol_.total_h[i] = chosen - sum;
    }
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
  MolGraph mol_;
  std::vector<std::size_t> atom_pos_;
  int prev_ = -1;
  PendingBond pending_;
  std::vector<std::pair<int, std::size_t>> branch_stack_;
  std::map<int, RingSlot> ring_slots_;
};

}  // namespace

MolGraph parse_smiles(std::string_view text) {
  if (text.empty()) throw ParseError("empty SMILES", 0);
  return SmilesParser(text, 0).run();
}

ReactionParts parse_reaction(std::string_view text) {
  std::size_t first = text.find('>');
  if (first == std::string_view::npos)
    throw ParseError("reaction needs two '>' separators", text.size());
  std::size_t second = text.find('>', first + 1);
  if (second == std::string_view::npos)
    throw ParseError("reaction needs two '>' separators", text.size());
  if (text.find('>', second + 1) != std::string_view::npos)
    throw ParseError("too many '>' separators", text.find('>', second + 1));

  auto parse_segment = [&](std::string_view seg, std::size_t base) {
    std::vector<MolGraph> mols;
    if (seg.empty()) return mols;
    MolGraph merged = SmilesParser(seg, base).run();
    mols = split_fragments(merged);
    return mols;
  };

  ReactionParts parts;
  parts.reactants = parse_segment(text.substr(0, first), 0);
  parts.reagents =
      parse_segment(text.substr(first + 1, second - first - 1), first + 1);
  parts.products = parse_segment(text.substr(second + 1), second + 1);
  if (parts.reactants.empty())
    throw ParseError("reaction has no reactants", 0);
  if (parts.products.empty())
    throw ParseError("reaction has no products", second + 1);
  return parts;
}

// ---------------------------------------------------------------------------
// Derived flags

void ring_and_conjugation_flags(MolGraph& mol) {
  Adjacency adj = build_adjacency(mol);
  int n = mol.num_atoms();
  for (Bond& b : mol.bonds) b.in_ring = false;

  // Bridge finding; every non-bridge edge lies on a cycle.
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    int u;
    int parent_bond;
    std::size_t next;
  };
  std::vector<Frame> stack;
  for (int s = 0; s < n; ++s) {
    if (disc[s] >= 0) continue;
    disc[s] = low[s] = timer++;
    stack.push_back({s, -1, 0});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj[f.u].size()) {
        auto [v, bi] = adj[f.u][f.next++];
        if (bi == f.parent_bond) continue;
        if (disc[v] < 0) {
          disc[v] = low[v] = timer++;
          stack.push_back({v, bi, 0});
        } else {
          low[f.u] = std::min(low[f.u], disc[v]);
          mol.bonds[bi].in_ring = true;  // back edge is always on a cycle
        }
      } else {
        int u = f.u;
        int pb = f.parent_bond;
        stack.pop_back();
        if (pb >= 0) {
          int p = stack.back().u;
          low[p] = std::min(low[p], low[u]);
          // A tree edge is on a cycle unless it is a bridge.
          if (low[u] <= disc[p]) mol.bonds[pb].in_ring = true;
        }
      }
    }
  }

  std::vector<char> sp2ish(n, 0);
  for (int i = 0; i < n; ++i)
    if (mol.atoms[i].aromatic) sp2ish[i] = 1;
  for (const Bond& b : mol.bonds)
    if (b.order == BondOrder::Double || b.order == BondOrder::Triple ||
        b.order == BondOrder::Aromatic)
      sp2ish[b.a] = sp2ish[b.b] = 1;

  for (int bi = 0; bi < mol.num_bonds(); ++bi) {
    Bond& b = mol.bonds[bi];
    switch (b.order) {
      case BondOrder::Aromatic:
        b.conjugated = true;
        break;
      case BondOrder::Single:
        b.conjugated = sp2ish[b.a] && sp2ish[b.b];
        break;
      default: {
        // A multiple bond joins the system when an endpoint has another
        // pi neighbor.
        bool joined = false;
        for (int end : {b.a, b.b})
          for (auto [v, obi] : adj[end])
            if (obi != bi && sp2ish[v]) joined = true;
        b.conjugated = joined;
        break;
      }
    }
  }
}

void finalize_graph(MolGraph& mol) {
  ring_and_conjugation_flags(mol);
  Adjacency adj = build_adjacency(mol);
  mol.total_h.assign(mol.atoms.size(), 0);
  for (int i = 0; i < mol.num_atoms(); ++i) {
    const Atom& atom = mol.atoms[i];
    if (atom.explicit_h) {
      mol.total_h[i] = *atom.explicit_h;
      continue;
    }
    if (atom.formal_charge != 0) continue;  // charged atoms keep explicit counts
    const std::vector<int>& vals = default_valences(atom.element);
    int sum = floored_bond_sum(mol, adj, i);
    for (int v : vals)
      if (v >= sum) {
        mol.total_h[i] = v - sum;
        break;
      }
  }
}

// ---------------------------------------------------------------------------
// Canonical ranks and writing

namespace {

std::vector<int> dense_codes(std::vector<std::pair<std::vector<int>, int>>& keys) {
  std::sort(keys.begin(), keys.end());
  std::vector<int> ranks(keys.size());
  int code = -1;
  const std::vector<int>* last = nullptr;
  for (auto& [key, idx] : keys) {
    if (!last || key != *last) {
      ++code;
      last = &key;
    }
    ranks[idx] = code;
  }
  return ranks;
}

class Canonicalizer {
 public:
  Canonicalizer(const MolGraph& mol, const WriteOptions& opts)
      : mol_(mol), opts_(opts), adj_(build_adjacency(mol)) {}

  static constexpr int kLeafBudget = 512;

  std::pair<std::string, std::vector<int>> run() {
    std::vector<int> ranks = initial_ranks();
    refine(ranks);
    search(ranks);
    return {best_, best_ranks_};
  }

 private:
  std::vector<int> initial_ranks() const {
    std::vector<std::pair<std::vector<int>, int>> keys;
    keys.reserve(mol_.atoms.size());
    std::vector<int> deg = atom_degrees(mol_);
    for (int i = 0; i < mol_.num_atoms(); ++i) {
      const Atom& a = mol_.atoms[i];
      keys.push_back(
          {{a.element, a.formal_charge, deg[i], mol_.total_h[i]}, i});
    }
    return dense_codes(keys);
  }

  int distinct(const std::vector<int>& ranks) const {
    return ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end()) + 1;
  }

  void refine(std::vector<int>& ranks) const {
    int classes = distinct(ranks);
    while (classes < static_cast<int>(ranks.size())) {
      std::vector<std::pair<std::vector<int>, int>> keys;
      keys.reserve(ranks.size());
      for (int i = 0; i < mol_.num_atoms(); ++i) {
        std::vector<int> key{ranks[i]};
        std::vector<std::pair<int, int>> nb;
        for (auto [v, bi] : adj_[i])
          nb.emplace_back(order_code(mol_.bonds[bi].order), ranks[v]);
        std::sort(nb.begin(), nb.end());
        for (auto [oc, r] : nb) {
          key.push_back(oc);
          key.push_back(r);
        }
        keys.push_back({std::move(key), i});
      }
      std::vector<int> next = dense_codes(keys);
      int next_classes = distinct(next);
      if (next_classes == classes) {
        ranks = std::move(next);
        return;
      }
      ranks = std::move(next);
      classes = next_classes;
    }
  }

  // Smallest refined class with more than one member, or -1 when discrete.
  int tied_class(const std::vector<int>& ranks, std::vector<int>& members) const {
    int classes = distinct(ranks);
    std::vector<int> count(classes, 0);
    for (int r : ranks) ++count[r];
    for (int c = 0; c < classes; ++c) {
      if (count[c] <= 1) continue;
      members.clear();
      for (int i = 0; i < mol_.num_atoms(); ++i)
        if (ranks[i] == c) members.push_back(i);
      return c;
    }
    return -1;
  }

  std::vector<int> individualize(const std::vector<int>& ranks, int atom) const {
    std::vector<std::pair<std::vector<int>, int>> keys;
    keys.reserve(ranks.size());
    for (int i = 0; i < mol_.num_atoms(); ++i)
      keys.push_back({{ranks[i] * 2 + (i == atom ? 0 : 1)}, i});
    return dense_codes(keys);
  }

  void search(std::vector<int> ranks) {
    refine(ranks);
    std::vector<int> members;
    int cls = tied_class(ranks, members);
    if (cls < 0) {
      ++leaves_;
      std::string s = write(ranks);
      if (!have_best_ || s < best_) {
        have_best_ = true;
        best_ = std::move(s);
        best_ranks_ = std::move(ranks);
      }
      return;
    }
    if (leaves_ >= kLeafBudget) {
      search(individualize(ranks, members.front()));
      return;
    }
    for (int atom : members) {
      search(individualize(ranks, atom));
      if (leaves_ >= kLeafBudget) break;
    }
  }

  // --- emission ---

  struct BackRef {
    int partner;
    int bond;
  };

  std::string write(const std::vector<int>& ranks) const {
    int n = mol_.num_atoms();
    int root = 0;
    for (int i = 0; i < n; ++i)
      if (ranks[i] < ranks[root]) root = i;

    std::vector<int> preorder(n, -1);
    std::vector<char> bond_back(mol_.bonds.size(), 0);
    std::vector<char> bond_seen(mol_.bonds.size(), 0);
    std::vector<std::vector<BackRef>> backs(n);
    std::vector<std::vector<std::pair<int, int>>> children(n);  // (child, bond)

    struct Frame {
      int u;
      std::size_t next;
    };
    std::vector<std::vector<std::pair<int, int>>> order(n);
    for (int u = 0; u < n; ++u) {
      order[u] = adj_[u];
      std::sort(order[u].begin(), order[u].end(),
                [&](const auto& x, const auto& y) {
                  return std::make_pair(ranks[x.first], x.second) <
                         std::make_pair(ranks[y.first], y.second);
                });
    }
    int clock = 0;
    preorder[root] = clock++;
    std::vector<Frame> stack{{root, 0}};
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next >= order[f.u].size()) {
        stack.pop_back();
        continue;
      }
      auto [v, bi] = order[f.u][f.next++];
      if (bond_seen[bi]) continue;
      bond_seen[bi] = 1;
      if (preorder[v] < 0) {
        preorder[v] = clock++;
        children[f.u].emplace_back(v, bi);
        stack.push_back({v, 0});
      } else {
        bond_back[bi] = 1;
        backs[f.u].push_back({v, bi});
        backs[v].push_back({f.u, bi});
      }
    }

    for (int u = 0; u < n; ++u)
      std::sort(backs[u].begin(), backs[u].end(),
                [&](const BackRef& x, const BackRef& y) {
                  return preorder[x.partner] < preorder[y.partner];
                });

    std::string out;
    std::vector<int> digit_of_bond(mol_.bonds.size(), -1);
    std::vector<char> digit_used(100, 0);
    emit(root, -1, ranks, preorder, children, backs, digit_of_bond, digit_used,
         out);
    return out;
  }

  std::string bond_token(int bi) const {
    const Bond& b = mol_.bonds[bi];
    bool both_arom = mol_.atoms[b.a].aromatic && mol_.atoms[b.b].aromatic;
    BondOrder def = both_arom ? BondOrder::Aromatic : BondOrder::Single;
    if (b.order == def) return "";
    switch (b.order) {
      case BondOrder::Single: return "-";
      case BondOrder::Double: return "=";
      case BondOrder::Triple: return "#";
      case BondOrder::Aromatic: return ":";
    }
    return "";
  }

  void emit(int u, int parent_bond, const std::vector<int>& ranks,
            const std::vector<int>& preorder,
            const std::vector<std::vector<std::pair<int, int>>>& children,
            const std::vector<std::vector<BackRef>>& backs,
            std::vector<int>& digit_of_bond, std::vector<char>& digit_used,
            std::string& out) const {
    (void)parent_bond;
    (void)ranks;
    out += atom_token(u);
    for (const BackRef& ref : backs[u]) {
      int digit = digit_of_bond[ref.bond];
      if (digit < 0) {
        digit = 1;
        while (digit < 100 && digit_used[digit]) ++digit;
        digit_used[digit] = 1;
        digit_of_bond[ref.bond] = digit;
      } else {
        digit_used[digit] = 0;
      }
      out += bond_token(ref.bond);
      if (digit >= 10) {
        out += '%';
        out += static_cast<char>('0' + digit / 10);
      }
      out += static_cast<char>('0' + digit % 10);
    }
    const auto& kids = children[u];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      auto [v, bi] = kids[i];
      bool last = i + 1 == kids.size();
      if (!last) out += '(';
      out += bond_token(bi);
      emit(v, bi, ranks, preorder, children, backs, digit_of_bond, digit_used,
           out);
      if (!last) out += ')';
    }
  }

  std::string atom_token(int u) const {
    const Atom& a = mol_.atoms[u];
    std::string sym = element_symbol(a.element);
    if (a.aromatic)
      for (char& c : sym) c = static_cast<char>(std::tolower(c));

    bool bracket = false;
    if (a.isotope || a.formal_charge != 0) bracket = true;
    if (opts_.with_maps && a.map_num) bracket = true;
    if (!organic_subset(a.element)) bracket = true;
    if (a.aromatic && !aromatic_capable(a.element)) bracket = true;
    int implied = -1;
    if (!bracket) {
      const std::vector<int>& vals = default_valences(a.element);
      int sum = floored_bond_sum(mol_, adj_, u);
      for (int v : vals)
        if (v >= sum) {
          implied = v - sum;
          break;
        }
      if (implied != mol_.total_h[u]) bracket = true;
    }
    if (!bracket) return sym;

    std::string out = "[";
    if (a.isotope) out += std::to_string(*a.isotope);
    out += sym;
    int h = mol_.total_h[u];
    if (h == 1) {
      out += 'H';
    } else if (h > 1) {
      out += 'H';
      out += std::to_string(h);
    }
    if (a.formal_charge == 1) {
      out += '+';
    } else if (a.formal_charge == -1) {
      out += '-';
    } else if (a.formal_charge > 1) {
      out += '+';
      out += std::to_string(a.formal_charge);
    } else if (a.formal_charge < -1) {
      out += '-';
      out += std::to_string(-a.formal_charge);
    }
    if (opts_.with_maps && a.map_num) {
      out += ':';
      out += std::to_string(*a.map_num);
    }
    out += ']';
    return out;
  }

  const MolGraph& mol_;
  WriteOptions opts_;
  Adjacency adj_;
  int leaves_ = 0;
  bool have_best_ = false;
  std::string best_;
  std::vector<int> best_ranks_;
};

}  // namespace

std::vector<int> canonical_ranks(const MolGraph& mol) {
  if (mol.total_h.size() != mol.atoms.size())
    throw std::invalid_argument("canonical_ranks needs a finalized graph");
  return Canonicalizer(mol, {}).run().second;
}

std::string canonical_form(const MolGraph& mol, const WriteOptions& opts) {
  if (mol.total_h.size() != mol.atoms.size())
    throw std::invalid_argument("canonical_form needs a finalized graph");
  if (mol.empty()) return "";
  std::vector<std::string> parts;
  for (const MolGraph& frag : split_fragments(mol))
    parts.push_back(Canonicalizer(frag, opts).run().first);
  std::sort(parts.begin(), parts.end());
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    out += '.';
    out += parts[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tokenizer

std::vector<std::string> tokenize_smiles(std::string_view text) {
  static constexpr std::string_view kSingles = "NOSPFIbcnosp()=#-+\\/.:~@?>*$";
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '[') {
      std::size_t close = text.find(']', i);
      if (close == std::string_view::npos)
        throw ParseError("unterminated bracket atom", i);
      tokens.emplace_back(text.substr(i, close - i + 1));
      i = close + 1;
      continue;
    }
    if (c == 'B') {
      if (i + 1 < text.size() && text[i + 1] == 'r') {
        tokens.emplace_back("Br");
        i += 2;
      } else {
        tokens.emplace_back("B");
        ++i;
      }
      continue;
    }
    if (c == 'C') {
      if (i + 1 < text.size() && text[i + 1] == 'l') {
        tokens.emplace_back("Cl");
        i += 2;
      } else {
        tokens.emplace_back("C");
        ++i;
      }
      continue;
    }
    if (c == '%') {
      if (i + 2 >= text.size() || !std::isdigit(text[i + 1]) ||
          !std::isdigit(text[i + 2]))
        throw ParseError("'%' needs two digits", i);
      tokens.emplace_back(text.substr(i, 3));
      i += 3;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        kSingles.find(c) != std::string_view::npos) {
      tokens.emplace_back(1, c);
      ++i;
      continue;
    }
    throw ParseError(std::string("character outside token alphabet: '") + c +
                         "'",
                     i);
  }
  return tokens;
}

}  // namespace rxnalign
