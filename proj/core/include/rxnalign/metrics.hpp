#pragma once

// Evaluation metrics: top-k accuracy for condition combinations (order-blind
// within each role) and reagent sets, and regression error summaries.

#include <array>
#include <string>
#include <vector>

#include "rxnalign/dataset.hpp"

namespace rxnalign {

// Five slot values with "<none>" marking an empty slot: catalyst, two
// solvents, two reagents.
using ConditionCombo = std::array<std::string, kConditionSlots>;

// Role groups compare as multisets, so swapped solvents still match; an
// empty slot only ever matches another empty slot.
bool combo_role_match(const ConditionCombo& a, const ConditionCombo& b,
                      int role);  // 0 catalyst, 1 solvents, 2 reagents
bool combo_match(const ConditionCombo& a, const ConditionCombo& b);

struct ConditionTopk {
  int k = 0;
  double overall = 0;
  double catalyst = 0, solvent = 0, reagent = 0;
};

// `ranked[i]` holds model guesses for item i, best first; `refs[i]` holds
// every reference recorded for that item (duplicated reactions are grouped
// upstream), and a guess counts when it matches any one of them.
std::vector<ConditionTopk> condition_topk(
    const std::vector<std::vector<ConditionCombo>>& ranked,
    const std::vector<std::vector<ConditionCombo>>& refs,
    const std::vector<int>& ks);

// Dot-joined SMILES compare as multisets of canonical fragments; one side
// failing to parse never matches.
bool reagent_set_match(const std::string& predicted, const std::string& reference);

std::vector<double> generation_topk(
    const std::vector<std::vector<std::string>>& ranked,
    const std::vector<std::vector<std::string>>& refs,
    const std::vector<int>& ks);

struct RegressionMetrics {
  double mae = 0;
  double rmse = 0;
  double r2 = 0;
  std::size_t count = 0;
};

RegressionMetrics compute_regression_metrics(const std::vector<double>& pred,
                                             const std::vector<double>& target);

}  // namespace rxnalign
