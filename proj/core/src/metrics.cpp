#include "rxnalign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace rxnalign {
namespace {

std::array<std::string, 2> sorted_pair(const std::string& x, const std::string& y) {
  return x <= y ? std::array<std::string, 2>{x, y} : std::array<std::string, 2>{y, x};
}

}  // namespace

bool combo_role_match(const ConditionCombo& a, const ConditionCombo& b, int role) {
  switch (role) {
    case 0:
      return a[0] == b[0];
    case 1:
      return sorted_pair(a[1], a[2]) == sorted_pair(b[1], b[2]);
    case 2:
      return sorted_pair(a[3], a[4]) == sorted_pair(b[3], b[4]);
    default:
      throw std::out_of_range("combo role must be 0, 1 or 2");
  }
}

bool combo_match(const ConditionCombo& a, const ConditionCombo& b) {
  return combo_role_match(a, b, 0) && combo_role_match(a, b, 1) &&
         combo_role_match(a, b, 2);
}

std::vector<ConditionTopk> condition_topk(
    const std::vector<std::vector<ConditionCombo>>& ranked,
    const std::vector<std::vector<ConditionCombo>>& refs,
    const std::vector<int>& ks) {
  if (ranked.size() != refs.size())
    throw std::invalid_argument("prediction/reference count mismatch");
  std::vector<ConditionTopk> out;
  for (int k : ks) {
    ConditionTopk row;
    row.k = k;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      bool all = false, cat = false, solv = false, reag = false;
      const std::size_t depth = std::min(ranked[i].size(), std::size_t(k));
      for (std::size_t j = 0; j < depth; ++j) {
        const auto& guess = ranked[i][j];
        for (const auto& ref : refs[i]) {
          cat = cat || combo_role_match(guess, ref, 0);
          solv = solv || combo_role_match(guess, ref, 1);
          reag = reag || combo_role_match(guess, ref, 2);
          all = all || combo_match(guess, ref);
        }
      }
      row.overall += all;
      row.catalyst += cat;
      row.solvent += solv;
      row.reagent += reag;
    }
    if (!refs.empty()) {
      const double n = double(refs.size());
      row.overall /= n;
      row.catalyst /= n;
      row.solvent /= n;
      row.reagent /= n;
    }
    out.push_back(row);
  }
  return out;
}

bool reagent_set_match(const std::string& predicted, const std::string& reference) {
  auto canonical_multiset =
      [](const std::string& text) -> std::optional<std::map<std::string, int>> {
    std::map<std::string, int> out;
    if (text.empty()) return out;
    try {
      for (const auto& mol : split_fragments(parse_smiles(text)))
        ++out[canonical_form(mol)];
    } catch (const ParseError&) {
      return std::nullopt;
    }
    return out;
  };
  const auto lhs = canonical_multiset(predicted);
  const auto rhs = canonical_multiset(reference);
  return lhs && rhs && *lhs == *rhs;
}

std::vector<double> generation_topk(
    const std::vector<std::vector<std::string>>& ranked,
    const std::vector<std::vector<std::string>>& refs,
    const std::vector<int>& ks) {
  if (ranked.size() != refs.size())
    throw std::invalid_argument("prediction/reference count mismatch");
  std::vector<double> out;
  for (int k : ks) {
    double hits = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      bool hit = false;
      const std::size_t depth = std::min(ranked[i].size(), std::size_t(k));
      for (std::size_t j = 0; j < depth && !hit; ++j)
        for (const auto& ref : refs[i])
          if (reagent_set_match(ranked[i][j], ref)) {
            hit = true;
            break;
          }
      hits += hit;
    }
    out.push_back(refs.empty() ? 0.0 : hits / double(refs.size()));
  }
  return out;
}

RegressionMetrics compute_regression_metrics(const std::vector<double>& pred,
                                             const std::vector<double>& target) {
  if (pred.size() != target.size())
    throw std::invalid_argument("prediction/reference count mismatch");
  RegressionMetrics m;
  m.count = pred.size();
  if (pred.empty()) return m;
  double abs_sum = 0, sq_sum = 0, mean = 0;
  for (double t : target) mean += t;
  mean /= double(target.size());
  double ss_tot = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double err = pred[i] - target[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  m.mae = abs_sum / double(pred.size());
  m.rmse = std::sqrt(sq_sum / double(pred.size()));
  m.r2 = ss_tot > 0 ? 1.0 - sq_sum / ss_tot : (sq_sum == 0 ? 1.0 : 0.0);
  return m;
}

}  // namespace rxnalign
