#pragma once

// Deterministic surrogate tables shaped like the reaction benchmarks the
// models are meant for.  Targets are smooth functions of the structural and
// condition choices plus gaussian noise, so a correct implementation can
// learn them while metric bugs still show.

#include <cstdint>
#include <string>
#include <vector>

#include "rxnalign/csv.hpp"

namespace rxnalign::synth {

// Aryl amination plate: id,reaction,target,conditions.  Reactions are mapped
// aryl bromide + amine couplings; conditions hold ligand.base(.additive)
// fragments; target is a yield in [1, 99].
CsvTable amination_yield_table(std::size_t rows, std::uint64_t seed);

// Competing-site chlorination: id,reaction,target.  Target is the free
// energy gap between the two sites in kcal/mol, roughly [-3, 3].
CsvTable selectivity_table(std::size_t rows, std::uint64_t seed);

// Condition recommendation: id,reaction,catalyst,solvent1,solvent2,
// reagent1,reagent2.  Each reaction family draws its combination from a
// family-specific distribution, so the global majority combination is a
// weak baseline.
CsvTable condition_table(std::size_t rows, std::uint64_t seed);

// The exact combination frequencies behind condition_table, best first.
std::vector<std::pair<std::vector<std::string>, double>> condition_distribution();

// Distinct valid mapped reactions covering every template family, with
// leaving groups, hydrogen-count changes and bond-order changes.
std::vector<std::string> mapped_reactions(std::size_t count);

// SMILES corpus exercising brackets, charges, isotopes, aromatics, rings
// above 9, fragments and organometallics.
std::vector<std::string> smiles_corpus();

}  // namespace rxnalign::synth
