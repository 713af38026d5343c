#include "support/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "rxnalign/rng.hpp"

namespace rxnalign::synth {
namespace {

std::string num(int v) { return std::to_string(v); }

// Alkyl chain whose last atom is the attachment point.
std::string chain(int len, int start) {
  std::string out = "[CH3:" + num(start) + "]";
  for (int i = 1; i < len; ++i) out = out + "[CH2:" + num(start + i) + "]";
  return out;
}

// Alkyl chain whose first atom is the attachment point.
std::string chain_from(int len, int start) {
  if (len == 1) return "[CH3:" + num(start) + "]";
  std::string out = "[CH2:" + num(start) + "]";
  for (int i = 1; i + 1 < len; ++i) out = out + "[CH2:" + num(start + i) + "]";
  return out + "[CH3:" + num(start + len - 1) + "]";
}

constexpr int kFamilies = 8;

// One mapped reaction per (family, variant); variants vary chain lengths.
// Every family keeps the map story honest: broken or reordered bonds,
// hydrogen-count changes, and unmapped atoms that become the leaving tail.
std::string family_reaction(int family, int variant) {
  int la = 1 + variant % 6;
  int lb = 1 + (variant / 6) % 6;
  switch (family) {
    case 0: {  // halide substitution by water / sulfide / ammonia
      int nu = variant % 3;
      int len = 1 + (variant / 3) % 6;
      int m = len + 1;
      std::string r = chain(len, 1);
      const char* react[] = {"[OH2:", "[SH2:", "[NH3:"};
      const char* prod[] = {"[OH:", "[SH:", "[NH2:"};
      return r + "Br." + react[nu] + num(m) + "]>>" + r + prod[nu] + num(m) + "]";
    }
    case 1: {  // esterification, acid hydroxyl leaves
      int x = la + 1, y = x + 2;
      std::string acid = chain(la, 1) + "[C:" + num(x) + "](=[O:" + num(x + 1) + "])";
      std::string rest = chain_from(lb, y + 1);
      return acid + "O.[OH:" + num(y) + "]" + rest + ">>" + acid + "[O:" + num(y) + "]" + rest;
    }
    case 2: {  // amide coupling
      int x = la + 1, y = x + 2;
      std::string acid = chain(la, 1) + "[C:" + num(x) + "](=[O:" + num(x + 1) + "])";
      std::string rest = chain_from(lb, y + 1);
      return acid + "O.[NH2:" + num(y) + "]" + rest + ">>" + acid + "[NH:" + num(y) + "]" + rest;
    }
    case 3: {  // ketone reduction
      int x = la + 1;
      std::string left = chain(la, 1), right = chain_from(lb, x + 2);
      return left + "[C:" + num(x) + "](=[O:" + num(x + 1) + "])" + right + ">>" +
             left + "[CH:" + num(x) + "]([OH:" + num(x + 1) + "])" + right;
    }
    case 4: {  // alcohol oxidation
      int x = la + 1;
      std::string left = chain(la, 1), right = chain_from(lb, x + 2);
      return left + "[CH:" + num(x) + "]([OH:" + num(x + 1) + "])" + right + ">>" +
             left + "[C:" + num(x) + "](=[O:" + num(x + 1) + "])" + right;
    }
    case 5: {  // HBr addition across a terminal alkene
      int len = 1 + variant % 6;
      int m = len + 3;
      std::string tail = chain_from(len, 3);
      return "[CH2:1]=[CH:2]" + tail + ".[BrH:" + num(m) + "]>>[CH3:1][CH:2]([Br:" +
             num(m) + "])" + tail;
    }
    case 6: {  // ether formation from halide and alcohol
      int y = la + 1;
      std::string left = chain(la, 1), rest = chain_from(lb, y + 1);
      return left + "Br.[OH:" + num(y) + "]" + rest + ">>" + left + "[O:" + num(y) + "]" + rest;
    }
    default: {  // aromatic chlorination on an alkylbenzene
      int len = 1 + variant % 6;
      int m = len + 7;
      std::string ring_r = "[cH:1]1[cH:2][cH:3][cH:4][cH:5][c:6]1";
      std::string ring_p = "[c:1]1([Cl:" + num(m) + "])[cH:2][cH:3][cH:4][cH:5][c:6]1";
      std::string tail = chain_from(len, 7);
      return ring_r + tail + ".[Cl:" + num(m) + "]Cl>>" + ring_p + tail;
    }
  }
}

int family_variants(int family) {
  switch (family) {
    case 0: return 18;
    case 5: return 6;
    case 7: return 6;
    default: return 36;
  }
}

// ---- aryl amination plate -------------------------------------------------

struct Substituent {
  const char* frag;   // mapped fragment attached to the ring, maps from base
  int map_span;       // how many map numbers the fragment consumes
  double electronic;  // effect on the coupling yield
};

const std::array<Substituent, 8> kAryl = {{
    {"", 0, 0.0},
    {"[F:{}]", 1, 4.0},
    {"[Cl:{}]", 1, 6.0},
    {"[CH3:{}]", 1, -3.0},
    {"[O:{}][CH3:{}]", 2, -7.0},
    {"[C:{}]([F:{}])([F:{}])[F:{}]", 4, 9.0},
    {"[C:{}]#[N:{}]", 2, 11.0},
    {"[N+:{}](=[O:{}])[O-:{}]", 3, 13.0},
}};

// Fills each {} with consecutive map numbers starting at base.
std::string fill_maps(const std::string& pattern, int base) {
  std::string out;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '{' && i + 1 < pattern.size() && pattern[i + 1] == '}') {
      out += num(base++);
      ++i;
    } else {
      out += pattern[i];
    }
  }
  return out;
}

std::string aryl_bromide(int sub) {
  const Substituent& s = kAryl[static_cast<std::size_t>(sub)];
  if (s.map_span == 0)
    return "Br[c:1]1[cH:2][cH:3][cH:4][cH:5][cH:6]1";
  return "Br[c:1]1[cH:2][cH:3][c:4](" + fill_maps(s.frag, 20) + ")[cH:5][cH:6]1";
}

// Ring written with ring digit 2 so it can sit inside an amine branch.
std::string aryl_branch(int sub) {
  const Substituent& s = kAryl[static_cast<std::size_t>(sub)];
  if (s.map_span == 0)
    return "[c:1]2[cH:2][cH:3][cH:4][cH:5][cH:6]2";
  return "[c:1]2[cH:2][cH:3][c:4](" + fill_maps(s.frag, 20) + ")[cH:5][cH:6]2";
}

struct Amine {
  const char* react;
  const char* prod_open;   // product prefix, aryl ring branch goes after it
  const char* prod_close;  // product suffix
  double nucleophilicity;
};

const std::array<Amine, 6> kAmines = {{
    {"[NH2:10][CH3:11]", "[NH:10](", ")[CH3:11]", 8.0},
    {"[NH:10]([CH3:11])[CH3:12]", "[N:10](", ")([CH3:11])[CH3:12]", 6.0},
    {"[NH:10]1[CH2:11][CH2:12][CH2:13][CH2:14][CH2:15]1",
     "[N:10]1(", ")[CH2:11][CH2:12][CH2:13][CH2:14][CH2:15]1", 10.0},
    {"[NH:10]1[CH2:11][CH2:12][O:13][CH2:14][CH2:15]1",
     "[N:10]1(", ")[CH2:11][CH2:12][O:13][CH2:14][CH2:15]1", 7.0},
    {"[NH2:10][CH2:11][CH2:12][CH2:13][CH3:14]",
     "[NH:10](", ")[CH2:11][CH2:12][CH2:13][CH3:14]", 9.0},
    {"[NH2:10][c:11]1[cH:12][cH:13][cH:14][cH:15][cH:16]1",
     "[NH:10](", ")[c:11]1[cH:12][cH:13][cH:14][cH:15][cH:16]1", 2.0},
}};

const std::array<const char*, 4> kLigands = {
    "CP(C)C", "CCP(CC)CC", "CC(C)P(C(C)C)C(C)C",
    "c1ccc(P(c2ccccc2)c2ccccc2)cc1"};
const std::array<double, 4> kLigandGain = {0.80, 0.95, 1.15, 1.00};

const std::array<const char*, 3> kBases = {"CCN(CC)CC", "c1ccncc1",
                                           "CN(C)c1ccncc1"};
const std::array<double, 3> kBaseBoost = {5.0, 0.0, 8.0};

const std::array<const char*, 8> kAdditives = {"", "O", "CO", "CC#N",
                                               "CC(=O)O", "COC", "CCOCC",
                                               "CC(C)O"};

double additive_ligand_bonus(int additive, int ligand) {
  return 0.5 * static_cast<double>((additive * 3 + ligand * 5) % 17 - 8);
}

// ---- condition pools ------------------------------------------------------

const std::array<const char*, 5> kCatalysts = {"", "[Pd]", "[Ni]", "[Cu]",
                                               "[Fe]"};
const std::array<const char*, 7> kSolvents = {"O", "CO", "CCO", "CC#N",
                                              "C1CCOC1", "CCOCC", ""};
const std::array<const char*, 4> kReagents = {"CCN(CC)CC", "c1ccncc1",
                                              "CC(=O)O", ""};

std::vector<std::string> family_combo(int f, int rank) {
  std::vector<std::string> slots(5);
  slots[0] = kCatalysts[static_cast<std::size_t>((f + rank) % 5)];
  slots[1] = kSolvents[static_cast<std::size_t>((2 * f + rank) % 7)];
  slots[2] = (f % 3 == 0 && rank == 0)
                 ? kSolvents[static_cast<std::size_t>((2 * f + 3) % 7)]
                 : "";
  slots[3] = kReagents[static_cast<std::size_t>((f + 2 * rank) % 4)];
  slots[4] = (f % 4 == 1 && rank <= 1)
                 ? kReagents[static_cast<std::size_t>((f + 2 * rank + 1) % 4)]
                 : "";
  return slots;
}

constexpr std::array<double, 3> kComboProbs = {0.65, 0.25, 0.10};

}  // namespace

CsvTable amination_yield_table(std::size_t rows, std::uint64_t seed) {
  CsvTable table;
  table.header = {"id", "reaction", "target", "conditions"};
  nd::Pcg rng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    int sub = static_cast<int>(rng.below(kAryl.size()));
    int am = static_cast<int>(rng.below(kAmines.size()));
    int lig = static_cast<int>(rng.below(kLigands.size()));
    int base = static_cast<int>(rng.below(kBases.size()));
    int add = static_cast<int>(rng.below(kAdditives.size()));

    const Amine& amine = kAmines[static_cast<std::size_t>(am)];
    std::string reaction = aryl_bromide(sub) + "." + amine.react + ">>" +
                           amine.prod_open + aryl_branch(sub) + amine.prod_close;
    std::string conditions = std::string(kLigands[static_cast<std::size_t>(lig)]) +
                             "." + kBases[static_cast<std::size_t>(base)];
    if (kAdditives[static_cast<std::size_t>(add)][0] != '\0')
      conditions += std::string(".") + kAdditives[static_cast<std::size_t>(add)];

    double mu = 25.0 +
                1.9 * kLigandGain[static_cast<std::size_t>(lig)] *
                    (kAryl[static_cast<std::size_t>(sub)].electronic +
                     kAmines[static_cast<std::size_t>(am)].nucleophilicity) +
                1.5 * kBaseBoost[static_cast<std::size_t>(base)] +
                additive_ligand_bonus(add, lig);
    double y = mu + 1.5 * nd::gaussian(seed ^ 0x9a2fULL, i);
    y = std::min(99.0, std::max(1.0, y));

    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", y);
    table.rows.push_back({"y" + num(static_cast<int>(i)), reaction, buf, conditions});
  }
  return table;
}

CsvTable selectivity_table(std::size_t rows, std::uint64_t seed) {
  // Substituted arenes chlorinated at a fixed ring position; the target is
  // the energy gap controlling which site wins.
  static const std::array<const char*, 8> kFrag = {
      "[F:{}]", "[Cl:{}]", "[CH3:{}]", "[O:{}][CH3:{}]",
      "[C:{}]([F:{}])([F:{}])[F:{}]", "[C:{}]#[N:{}]", "[OH:{}]",
      "[N+:{}](=[O:{}])[O-:{}]"};
  static const std::array<double, 8> kP = {-1.2, -0.8, -0.4, -0.1,
                                           0.2, 0.6, 1.0, 1.4};
  static const std::array<double, 8> kQ = {0.9, 0.5, 0.1, -0.2,
                                           -0.6, -0.9, -1.1, 0.3};
  CsvTable table;
  table.header = {"id", "reaction", "target"};
  nd::Pcg rng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    int xi = static_cast<int>(rng.below(kFrag.size()));
    int yi = static_cast<int>(rng.below(kFrag.size()));
    std::string x = fill_maps(kFrag[static_cast<std::size_t>(xi)], 20);
    std::string y = fill_maps(kFrag[static_cast<std::size_t>(yi)], 30);
    std::string core = "[c:1]1(" + x + ")[cH:2][c:3](" + y + ")[cH:4]";
    std::string reaction = core + "[cH:5][cH:6]1.[Cl:40]Cl>>" + core +
                           "[c:5]([Cl:40])[cH:6]1";
    double gap = kP[static_cast<std::size_t>(xi)] + kQ[static_cast<std::size_t>(yi)] +
                 0.2 * static_cast<double>((xi * 5 + yi * 3) % 7 - 3) / 3.0 +
                 0.08 * nd::gaussian(seed ^ 0x51c7ULL, i);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", gap);
    table.rows.push_back({"s" + num(static_cast<int>(i)), reaction, buf});
  }
  return table;
}

CsvTable condition_table(std::size_t rows, std::uint64_t seed) {
  CsvTable table;
  table.header = {"id", "reaction", "catalyst", "solvent1", "solvent2",
                  "reagent1", "reagent2"};
  nd::Pcg rng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    int f = static_cast<int>(rng.below(kFamilies));
    int v = static_cast<int>(rng.below(
        static_cast<std::uint64_t>(family_variants(f))));
    double u = rng.uniform();
    int rank = u < kComboProbs[0] ? 0 : (u < kComboProbs[0] + kComboProbs[1] ? 1 : 2);
    std::vector<std::string> slots = family_combo(f, rank);
    table.rows.push_back({"c" + num(static_cast<int>(i)), family_reaction(f, v),
                          slots[0], slots[1], slots[2], slots[3], slots[4]});
  }
  return table;
}

std::vector<std::pair<std::vector<std::string>, double>> condition_distribution() {
  std::vector<std::pair<std::vector<std::string>, double>> out;
  for (int f = 0; f < kFamilies; ++f)
    for (int rank = 0; rank < 3; ++rank)
      out.emplace_back(family_combo(f, rank),
                       kComboProbs[static_cast<std::size_t>(rank)] / kFamilies);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::vector<std::string> mapped_reactions(std::size_t count) {
  std::vector<std::string> out;
  for (int v = 0; v < 36 && out.size() < count; ++v)
    for (int f = 0; f < kFamilies && out.size() < count; ++f)
      if (v < family_variants(f)) out.push_back(family_reaction(f, v));
  if (out.size() < count)
    throw std::runtime_error("mapped_reactions: not enough distinct templates");
  return out;
}

std::vector<std::string> smiles_corpus() {
  return {
      "C",
      "CCO",
      "c1ccccc1",
      "c1ccc2ccccc2c1",
      "c1cc[nH]c1",
      "c1ccncc1",
      "C1CCCCC1",
      "C%12CCCCC%12",
      "CC(C)(C)P(C(C)(C)C)C(C)(C)C",
      "CC(=O)[O-]",
      "F[B-](F)(F)F",
      "[Na+].[Cl-]",
      "[13CH4]",
      "[Pd]",
      "[se]1ccc2ccccc21",
      "Clc1ccccc1I",
      "S=C=S",
      "CC1(C)OB(OC1(C)C)c1ccccc1",
      "O=[N+]([O-])c1ccccc1",
      "CC(C)O",
      "CN1CCN(C)C1=O",
      "OC(=O)c1ccccc1O",
      "C(F)(F)F",
      "CSC",
      "N#Cc1ccc(Br)cc1",
  };
}

}  // namespace rxnalign::synth
